/** Browser entry point: mounts the annotator against the serving host's own API. */

import { createApi } from "./api.js";
import { createAnnotatorApp } from "./app.js";

const IMAGES = ["/images/street.svg", "/images/park.svg"];

window.addEventListener("DOMContentLoaded", () => {
  const container = document.getElementById("app");
  if (container === null) {
    throw new Error("missing #app container");
  }
  const app = createAnnotatorApp({ container, api: createApi(""), images: IMAGES });
  app.start().catch((error: unknown) => {
    container.textContent = `failed to start a session: ${String(error)}`;
  });
});
