/* tslint:disable */
/* eslint-disable */

export class LiveView {
    free(): void;
    [Symbol.dispose](): void;
    advance(x: number, y: number, steps: number): Uint8Array;
    digest(): string;
    frame(): Uint8Array;
    constructor(size: number, gamma_near: number, gamma_far: number);
    readonly height: number;
    readonly time: number;
    readonly width: number;
}

export function cutoffProbe(h: string, order: number, degree: number): string;

export function defectCurve(m: bigint, n: bigint, hbars: string, degree: number, window: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_liveview_free: (a: number, b: number) => void;
    readonly cutoffProbe: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly defectCurve: (a: bigint, b: bigint, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly liveview_advance: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly liveview_digest: (a: number) => [number, number];
    readonly liveview_frame: (a: number) => [number, number, number, number];
    readonly liveview_height: (a: number) => number;
    readonly liveview_new: (a: number, b: number, c: number) => [number, number, number];
    readonly liveview_time: (a: number) => number;
    readonly liveview_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
