// Canonical JSON and SHA-256 digests, byte-identical to the server's.
//
// Keys sort by code unit, strings escape minimally, and numbers format the
// way JSON.stringify already does; the server pins its float formatting to
// these ECMAScript conventions precisely so this file can stay this small.

export function canonicalJson(value: unknown): string {
  if (value === null) return "null";
  const kind = typeof value;
  if (kind === "boolean" || kind === "string") return JSON.stringify(value);
  if (kind === "number") {
    if (!Number.isFinite(value as number)) {
      throw new Error("non-finite number has no canonical form");
    }
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  if (kind === "object") {
    const obj = value as Record<string, unknown>;
    const keys = Object.keys(obj).sort();
    const parts = keys.map((k) => JSON.stringify(k) + ":" + canonicalJson(obj[k]));
    return "{" + parts.join(",") + "}";
  }
  throw new Error(`${kind} is not canonically serializable`);
}

export async function sha256Hex(text: string): Promise<string> {
  const bytes = new TextEncoder().encode(text);
  const digest = await crypto.subtle.digest("SHA-256", bytes);
  return Array.from(new Uint8Array(digest))
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}

export async function digest(value: unknown): Promise<string> {
  return sha256Hex(canonicalJson(value));
}
