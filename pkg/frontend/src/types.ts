/** JSON shapes of the session service. Field names mirror the wire format. */

export const DISCARD = -1;

export type SuggestionSource = "classifier" | "nn" | "explorer";

export interface Suggestion {
  image_id: number;
  bucket_id: number | null;
  source: SuggestionSource;
  oracle_flag: boolean;
  confidence: number | null;
}

export interface BucketDoc {
  bucket_id: number;
  name: string;
  color: string;
  active: boolean;
  size: number;
  archetypes: number[];
}

export interface SessionDoc {
  session_id: string;
  dataset: string;
  round: number;
  buckets: BucketDoc[];
}

export interface SuggestReply {
  round: number;
  exhausted: boolean;
  suggestions: Suggestion[];
}

export interface ViewMember {
  image_id: number;
  added_round: number;
  fast_forwarded: boolean;
  confidence: number | null;
  uri: string;
}

export interface ViewReply {
  bucket_id: number;
  members: ViewMember[];
}

export interface ImageDoc {
  image_id: number;
  uri: string;
  metadata: {
    concepts: [number, number][];
    extra: string | null;
  };
}

export type Assignments = Record<number, number>;
