/** Client view state. The server owns all session data; this is render state. */

export const SPEED_LEVELS_MS = [8000, 5000, 3000, 1500] as const;

export const GRID_SIZES = [16, 25, 36, 49] as const;

export type Mode = "grid" | "tetris";

export interface ViewState {
  mode: Mode;
  /** index into GRID_SIZES */
  gridSize: number;
  /** index into SPEED_LEVELS_MS */
  speedLevel: number;
  paused: boolean;
  sessionId: string | null;
  /** bucket receiving grid labels */
  selectedBucket: number | null;
}

export const initialState = (): ViewState => ({
  mode: "grid",
  gridSize: 1,
  speedLevel: 1,
  paused: false,
  sessionId: null,
  selectedBucket: null,
});

const clamp = (value: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, value));

export const setSpeedLevel = (state: ViewState, level: number): ViewState => ({
  ...state,
  speedLevel: clamp(level, 0, SPEED_LEVELS_MS.length - 1),
});

export const setGridSize = (state: ViewState, size: number): ViewState => ({
  ...state,
  gridSize: clamp(size, 0, GRID_SIZES.length - 1),
});

export const descentDurationMs = (state: ViewState): number => SPEED_LEVELS_MS[state.speedLevel];
