/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_liveview_free: (a: number, b: number) => void;
export const cutoffProbe: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const defectCurve: (a: bigint, b: bigint, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const liveview_advance: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const liveview_digest: (a: number) => [number, number];
export const liveview_frame: (a: number) => [number, number, number, number];
export const liveview_height: (a: number) => number;
export const liveview_new: (a: number, b: number, c: number) => [number, number, number];
export const liveview_time: (a: number) => number;
export const liveview_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
