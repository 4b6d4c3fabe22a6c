import { describe, expect, it } from "vitest";

import { attrsOfAll, blockOf, textOf, unescapeXml } from "../src/xmllite.js";

const REPLY =
  '<SOAP-ENV:Envelope xmlns:SOAP-ENV="http://schemas.xmlsoap.org/soap/envelope/"' +
  ' xmlns:dabml="http://location/dabml/"' +
  ' SOAP-ENV:encodingStyle="http://schemas.xmlsoap.org/soap/encoding/">' +
  "<SOAP-ENV:Header><status>ok</status><detail>volume set to 80</detail></SOAP-ENV:Header>" +
  "<SOAP-ENV:Body><dabml:DAB><audioContent><artiste>ABBA</artiste>" +
  "<songTitle>Dancing Queen</songTitle></audioContent></dabml:DAB></SOAP-ENV:Body>" +
  "</SOAP-ENV:Envelope>";

const STATE =
  "<receiverState><ensembleLabel>Campus DAB</ensembleLabel>" +
  "<selectedSubchannel>1</selectedSubchannel><volume>40</volume>" +
  "<afcOffset>0</afcOffset><audioMuted>false</audioMuted>" +
  '<recording subchannel="2" destination="clip" /></receiverState>';

describe("textOf", () => {
  it("reads header entries", () => {
    expect(textOf(REPLY, "status")).toBe("ok");
    expect(textOf(REPLY, "detail")).toBe("volume set to 80");
  });

  it("reads payload fields regardless of prefixes", () => {
    expect(textOf(REPLY, "artiste")).toBe("ABBA");
    expect(textOf(REPLY, "songTitle")).toBe("Dancing Queen");
  });

  it("misses absent elements", () => {
    expect(textOf(REPLY, "genre")).toBeNull();
  });

  it("treats self-closing elements as empty", () => {
    expect(textOf("<a><b /></a>", "b")).toBe("");
  });

  it("unescapes entities", () => {
    expect(textOf("<x><t>a &amp; b &lt;c&gt;</t></x>", "t")).toBe("a & b <c>");
    expect(unescapeXml("&quot;q&quot;")).toBe('"q"');
  });
});

describe("blockOf and attrsOfAll", () => {
  it("slices a payload block", () => {
    const block = blockOf(REPLY, "audioContent");
    expect(block).toContain("<artiste>ABBA</artiste>");
    expect(block).not.toContain("Header");
  });

  it("reads attributes of matching elements", () => {
    expect(attrsOfAll(STATE, "recording")).toEqual([
      { subchannel: "2", destination: "clip" },
    ]);
    expect(attrsOfAll(STATE, "missing")).toEqual([]);
  });

  it("reads behaviour ids from a listing reply", () => {
    const listing =
      "<behaviours><behaviour id=\"a\"><when field=\"audioContent.artiste\" match=\"equals\" value=\"x\" /></behaviour>" +
      "<behaviour id=\"b\" /></behaviours>";
    expect(attrsOfAll(listing, "behaviour").map((a) => a["id"])).toEqual(["a", "b"]);
  });
});
