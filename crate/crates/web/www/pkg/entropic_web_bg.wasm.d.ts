/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_densityview_free: (a: number, b: number) => void;
export const compareMethods: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
export const densityview_exact: (a: number) => [number, number];
export const densityview_l1: (a: number) => number;
export const densityview_numeric: (a: number) => [number, number];
export const densityview_x: (a: number) => [number, number];
export const evolveDensity: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const samplePaths: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
