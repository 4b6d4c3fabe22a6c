/**
 * DABml envelope composition and client-side validation.
 *
 * Composition is byte-compatible with the server's serializer: the test
 * suite holds a golden corpus shared with the server package and the
 * console must reproduce those envelopes exactly.
 */

export const SOAP_NS = "http://schemas.xmlsoap.org/soap/envelope/";
export const SOAP_ENCODING = "http://schemas.xmlsoap.org/soap/encoding/";
export const DABML_NS = "http://location/dabml/";

export type Action =
  | { kind: "setVolume"; level: number }
  | { kind: "selectSubchannel"; id: number }
  | { kind: "tuneEnsemble"; label: string }
  | { kind: "recordStart"; subchannel: number; destination: string }
  | { kind: "recordStop" }
  | { kind: "afcAdjust"; offset: number };

export interface TriggerClause {
  field: string;
  match: "equals" | "contains";
  value: string;
}

export type Reaction =
  | { kind: "device"; action: Action }
  | { kind: "saveToDisk"; destination: string }
  | { kind: "notify"; text: string };

export interface BehaviourSpec {
  id: string;
  trigger: TriggerClause[];
  reactions: Reaction[];
}

export function escapeText(value: string): string {
  return value.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function escapeAttr(value: string): string {
  return escapeText(value).replace(/"/g, "&quot;");
}

function headerXml(entries: Record<string, string>): string {
  const keys = Object.keys(entries);
  if (keys.length === 0) {
    return "<SOAP-ENV:Header />";
  }
  const body = keys.map((k) => `<${k}>${escapeText(entries[k] ?? "")}</${k}>`).join("");
  return `<SOAP-ENV:Header>${body}</SOAP-ENV:Header>`;
}

/** Wrap header entries and an optional payload fragment in the envelope. */
export function envelope(entries: Record<string, string>, payloadXml: string | null): string {
  const dab = payloadXml === null ? "<dabml:DAB />" : `<dabml:DAB>${payloadXml}</dabml:DAB>`;
  return (
    `<SOAP-ENV:Envelope xmlns:SOAP-ENV="${SOAP_NS}" xmlns:dabml="${DABML_NS}"` +
    ` SOAP-ENV:encodingStyle="${SOAP_ENCODING}">` +
    headerXml(entries) +
    `<SOAP-ENV:Body>${dab}</SOAP-ENV:Body>` +
    `</SOAP-ENV:Envelope>`
  );
}

export function actionXml(action: Action): string {
  switch (action.kind) {
    case "setVolume":
      return `<setVolume level="${action.level}" />`;
    case "selectSubchannel":
      return `<selectSubchannel id="${action.id}" />`;
    case "tuneEnsemble":
      return `<tuneEnsemble label="${escapeAttr(action.label)}" />`;
    case "recordStart":
      return `<recordStart subchannel="${action.subchannel}" destination="${escapeAttr(action.destination)}" />`;
    case "recordStop":
      return `<recordStop />`;
    case "afcAdjust":
      return `<afcAdjust offset="${action.offset}" />`;
  }
}

export function contentQuery(kind: "audio" | "data"): string {
  return envelope({ request: "contentInfo", kind }, null);
}

export function listBehavioursQuery(): string {
  return envelope({ request: "listBehaviours" }, null);
}

export function removeBehaviourQuery(id: string): string {
  return envelope({ request: "removeBehaviour", id }, null);
}

export function hardwareControl(actions: Action[]): string {
  const body = actions.map(actionXml).join("");
  return envelope({}, `<hardwareControl>${body}</hardwareControl>`);
}

function reactionXml(reaction: Reaction): string {
  switch (reaction.kind) {
    case "device":
      return `<device>${actionXml(reaction.action)}</device>`;
    case "saveToDisk":
      return `<saveToDisk destination="${escapeAttr(reaction.destination)}" />`;
    case "notify":
      return `<notify text="${escapeAttr(reaction.text)}" />`;
  }
}

export function behaviours(defs: BehaviourSpec[]): string {
  const body = defs
    .map((def) => {
      const whens = def.trigger
        .map(
          (c) =>
            `<when field="${escapeAttr(c.field)}" match="${c.match}" value="${escapeAttr(c.value)}" />`,
        )
        .join("");
      const reactions = def.reactions.map(reactionXml).join("");
      return `<behaviour id="${escapeAttr(def.id)}">${whens}${reactions}</behaviour>`;
    })
    .join("");
  return envelope({}, `<behaviours>${body}</behaviours>`);
}

/** Same ranges the server enforces; returns a message or null when valid. */
export function validateAction(action: Action): string | null {
  switch (action.kind) {
    case "setVolume":
      if (!Number.isInteger(action.level) || action.level < 0 || action.level > 100) {
        return `volume ${action.level} not in 0..100`;
      }
      return null;
    case "selectSubchannel":
      if (!Number.isInteger(action.id) || action.id < 0 || action.id > 63) {
        return `subchannel ${action.id} not in 0..63`;
      }
      return null;
    case "tuneEnsemble":
      return action.label ? null : "ensemble label must be non-empty";
    case "recordStart":
      if (!Number.isInteger(action.subchannel) || action.subchannel < 0 || action.subchannel > 63) {
        return `subchannel ${action.subchannel} not in 0..63`;
      }
      return action.destination ? null : "destination must be non-empty";
    case "recordStop":
      return null;
    case "afcAdjust":
      return Number.isInteger(action.offset) ? null : "offset must be an integer";
  }
}

export function validateBehaviour(spec: BehaviourSpec): string | null {
  if (!spec.id) {
    return "behaviour id must be non-empty";
  }
  if (spec.trigger.length === 0) {
    return "trigger must have at least one clause";
  }
  for (const clause of spec.trigger) {
    const root = clause.field.split(".", 1)[0];
    if ((root !== "audioContent" && root !== "dataContent") || !clause.field.includes(".")) {
      return `trigger field ${clause.field || "(empty)"} must address an audioContent or dataContent field`;
    }
  }
  if (spec.reactions.length === 0) {
    return "reactions must be non-empty";
  }
  for (const reaction of spec.reactions) {
    if (reaction.kind === "device") {
      const problem = validateAction(reaction.action);
      if (problem) {
        return problem;
      }
    } else if (reaction.kind === "saveToDisk" && !reaction.destination) {
      return "destination must be non-empty";
    }
  }
  return null;
}
