/**
 * Minimal XML field extraction for the server's reply shapes.
 *
 * Deliberately string-based and prefix-tolerant: replies are small, flat
 * documents whose element names we know, so a scanner beats dragging in a
 * full parser. Entity unescaping covers exactly what the server escapes.
 */

export function unescapeXml(value: string): string {
  return value
    .replace(/&lt;/g, "<")
    .replace(/&gt;/g, ">")
    .replace(/&quot;/g, '"')
    .replace(/&#10;/g, "\n")
    .replace(/&#09;/g, "\t")
    .replace(/&amp;/g, "&");
}

const NAME = "[A-Za-z0-9_.\\-]+";

/** Text of the first <localName> element, ignoring any namespace prefix. */
export function textOf(xml: string, localName: string): string | null {
  const re = new RegExp(
    `<(?:${NAME}:)?${localName}(?:\\s[^>]*?)?(?:/>|>([\\s\\S]*?)</(?:${NAME}:)?${localName}>)`,
  );
  const match = re.exec(xml);
  if (!match) {
    return null;
  }
  return unescapeXml(match[1] ?? "");
}

/** The full fragment of the first <localName>...</localName> block. */
export function blockOf(xml: string, localName: string): string | null {
  const re = new RegExp(
    `<(?:${NAME}:)?${localName}(?:\\s[^>]*?)?(?:/>|>[\\s\\S]*?</(?:${NAME}:)?${localName}>)`,
  );
  const match = re.exec(xml);
  return match ? match[0] : null;
}

/** Attribute maps of every <localName .../> element in document order. */
export function attrsOfAll(xml: string, localName: string): Record<string, string>[] {
  const out: Record<string, string>[] = [];
  const re = new RegExp(`<(?:${NAME}:)?${localName}((?:\\s[^>]*?)?)/?>`, "g");
  let match: RegExpExecArray | null;
  while ((match = re.exec(xml)) !== null) {
    const attrs: Record<string, string> = {};
    const attrRe = /([A-Za-z0-9_:.\-]+)="([^"]*)"/g;
    let attr: RegExpExecArray | null;
    while ((attr = attrRe.exec(match[1] ?? "")) !== null) {
      attrs[attr[1]!] = unescapeXml(attr[2]!);
    }
    out.push(attrs);
  }
  return out;
}
