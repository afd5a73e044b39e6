/** Browser entry point: boot the app against the same-origin service. */

import { App } from "./app.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app root element");

App.boot(root).catch((err) => {
  root.textContent = `failed to start: ${err}`;
});
