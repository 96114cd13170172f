/* tslint:disable */
/* eslint-disable */

export function addNoise(rgba: Uint8Array, width: number, height: number, sigma: number, seed: number): Uint8Array;

/**
 * Denoised pixels; the run time lands in `lastSeconds`.
 */
export function denoise(rgba: Uint8Array, width: number, height: number, sigma: number, method: string): Uint8Array;

export function lastSeconds(): number;

export function metrics(clean: Uint8Array, test: Uint8Array, width: number, height: number): Float64Array;

export function syntheticScene(size: number, seed: number): Uint8Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly addNoise: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly denoise: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly lastSeconds: () => number;
    readonly metrics: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly syntheticScene: (a: number, b: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
