/** Verbatim rendering of service-provided numbers.
 *
 * Displayed values must be the service's values, not client arithmetic:
 * labels are produced by JSON-serializing the parsed response field, which
 * round-trips the exact double the service sent.
 */

export function showValue(value: number | undefined | null): string {
  if (value === undefined || value === null) {
    return "-";
  }
  return JSON.stringify(value);
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
