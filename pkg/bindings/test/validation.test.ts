import { describe, expect, it } from "vitest";

import {
  BindingError,
  decodeHeatmap,
  encodeBoxes,
  fpemLoss,
  polygonIou,
} from "../src/index.js";

const OPTS = { width: 32, height: 32, channels: 2 };

function fieldOf(fn: () => unknown): string {
  try {
    fn();
  } catch (err) {
    expect(err).toBeInstanceOf(BindingError);
    return (err as BindingError).field;
  }
  throw new Error("expected a BindingError");
}

describe("structured validation errors", () => {
  it("empty box array encodes to a zero raster", () => {
    const buf = encodeBoxes([], OPTS);
    expect(buf.data.length).toBe(32 * 32 * 2);
    expect(buf.data.every((v) => v === 0)).toBe(true);
  });

  it("ragged box array names the boxes field", () => {
    expect(fieldOf(() => encodeBoxes([1, 2, 3, 4, 5, 0, 7], OPTS))).toBe("boxes");
  });

  it("bad class index names the class field", () => {
    expect(fieldOf(() => encodeBoxes([16, 16, 8, 4, 0.2, 9], OPTS))).toBe("class");
    expect(fieldOf(() => encodeBoxes([16, 16, 8, 4, 0.2, 0.5], OPTS))).toBe("class");
  });

  it("non-finite coordinates are rejected", () => {
    expect(fieldOf(() => encodeBoxes([NaN, 16, 8, 4, 0.2, 0], OPTS))).toBe("boxes");
  });

  it("non-positive sides are rejected", () => {
    expect(fieldOf(() => encodeBoxes([16, 16, 0, 4, 0.2, 0], OPTS))).toBe("boxes");
  });

  it("bad dims name the offending option", () => {
    expect(fieldOf(() => encodeBoxes([], { width: 0, height: 32, channels: 1 }))).toBe("width");
    expect(fieldOf(() => encodeBoxes([], { width: 32, height: 32, channels: 1, downsample: 0 })))
      .toBe("downsample");
  });

  it("tau out of range raises before any backend call", () => {
    const buf = { data: new Float32Array(4), width: 2, height: 2, channels: 1 };
    expect(() => decodeHeatmap(buf, { tau: 1.5 })).toThrowError(/tau out of range/);
    expect(fieldOf(() => decodeHeatmap(buf, { tau: 1.5 }))).toBe("tau");
  });

  it("heatmap length mismatch names the buffer", () => {
    const bad = { data: new Float32Array(5), width: 2, height: 2, channels: 1 };
    expect(fieldOf(() => decodeHeatmap(bad))).toBe("heatmap");
  });

  it("an all-zero heatmap decodes to zero detections", () => {
    const zero = { data: new Float32Array(16 * 16), width: 16, height: 16, channels: 1 };
    const result = decodeHeatmap(zero);
    expect(result.count).toBe(0);
    expect(result.data.length).toBe(0);
  });

  it("quad arity names the operand", () => {
    expect(fieldOf(() => polygonIou([0, 0, 1, 0, 1, 1], [0, 0, 1, 0, 1, 1, 0, 1]))).toBe("a");
    expect(fieldOf(() => polygonIou([0, 0, 1, 0, 1, 1, 0, 1], [0, 0]))).toBe("b");
  });

  it("loss dim mismatch names pred", () => {
    const a = { data: new Float32Array(4), width: 2, height: 2, channels: 1 };
    const b = { data: new Float32Array(9), width: 3, height: 3, channels: 1 };
    expect(fieldOf(() => fpemLoss(a, b, []))).toBe("pred");
  });
});
