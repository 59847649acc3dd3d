import { endianness } from "node:os";

import { BindingError } from "./errors.js";

const MAGIC = Buffer.from("THM1", "ascii");
const HEADER_BYTES = 16;

/** Channel-major float32 raster: data[c * height * width + y * width + x]. */
export interface HeatmapBuffer {
  data: Float32Array;
  width: number;
  height: number;
  channels: number;
}

export function checkHeatmapBuffer(field: string, buf: HeatmapBuffer): void {
  if (
    !Number.isInteger(buf.width) || buf.width < 1 ||
    !Number.isInteger(buf.height) || buf.height < 1 ||
    !Number.isInteger(buf.channels) || buf.channels < 1
  ) {
    throw new BindingError(field, `${field} dims must be positive integers`);
  }
  const expected = buf.width * buf.height * buf.channels;
  if (buf.data.length !== expected) {
    throw new BindingError(
      field,
      `${field}.data has ${buf.data.length} values, dims imply ${expected}`,
    );
  }
}

/** Serialize to THM1 bytes (magic, u32 LE dims, float32 LE payload). */
export function encodeThm1(buf: HeatmapBuffer): Buffer {
  checkHeatmapBuffer("heatmap", buf);
  const out = Buffer.alloc(HEADER_BYTES + 4 * buf.data.length);
  MAGIC.copy(out, 0);
  out.writeUInt32LE(buf.width, 4);
  out.writeUInt32LE(buf.height, 8);
  out.writeUInt32LE(buf.channels, 12);
  if (endianness() === "LE") {
    // typed-array bytes are already little-endian here; copy without leaking
    // extra bytes from the backing store
    out.set(
      new Uint8Array(buf.data.buffer, buf.data.byteOffset, buf.data.byteLength),
      HEADER_BYTES,
    );
  } else {
    const view = new DataView(out.buffer, out.byteOffset + HEADER_BYTES);
    for (let i = 0; i < buf.data.length; i++) {
      view.setFloat32(4 * i, buf.data[i], true);
    }
  }
  return out;
}

/** Parse THM1 bytes back into a heatmap buffer. */
export function decodeThm1(blob: Buffer): HeatmapBuffer {
  if (blob.length < HEADER_BYTES || !blob.subarray(0, 4).equals(MAGIC)) {
    throw new BindingError("thm1", "not a THM1 payload");
  }
  const width = blob.readUInt32LE(4);
  const height = blob.readUInt32LE(8);
  const channels = blob.readUInt32LE(12);
  const count = width * height * channels;
  if (blob.length !== HEADER_BYTES + 4 * count) {
    throw new BindingError(
      "thm1",
      `payload has ${blob.length - HEADER_BYTES} bytes, dims imply ${4 * count}`,
    );
  }
  const data = new Float32Array(count);
  if (endianness() === "LE") {
    const bytes = new Uint8Array(data.buffer);
    bytes.set(blob.subarray(HEADER_BYTES));
  } else {
    const view = new DataView(blob.buffer, blob.byteOffset + HEADER_BYTES);
    for (let i = 0; i < count; i++) {
      data[i] = view.getFloat32(4 * i, true);
    }
  }
  return { data, width, height, channels };
}
