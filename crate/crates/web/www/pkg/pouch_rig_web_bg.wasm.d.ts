/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_traces_free: (a: number, b: number) => void;
export const presetNames: () => [number, number];
export const presetText: (a: number, b: number) => [number, number, number, number];
export const runProgram: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const stepResponse: (a: number, b: number, c: number, d: number) => [number, number, number];
export const traces_csv: (a: number) => [number, number];
export const traces_series: (a: number, b: number) => [number, number];
export const traces_seriesCount: (a: number) => number;
export const traces_time: (a: number) => [number, number];
export const waveProgram: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
