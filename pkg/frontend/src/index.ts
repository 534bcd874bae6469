export * from "./types.js";
export * from "./selection.js";
export * from "./events.js";
export * from "./glyphs.js";
export * from "./scales.js";
export * from "./scene.js";
export * from "./client.js";
export * from "./chromosome.js";
export * from "./lines.js";
