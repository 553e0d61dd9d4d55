/** Control descriptors derived from the served schema.
 *
 * The console never hard-codes a range or a scene scope; everything the
 * form renders comes out of this module's output.
 */

import type { ControlSchema, FieldSchema, SceneName } from "./protocol.js";

export interface ControlDescriptor {
  name: string;
  field: FieldSchema;
  /** choices resolved for the active scene (choice fields only) */
  choices?: string[];
}

export async function fetchSchema(baseUrl: string): Promise<ControlSchema> {
  const res = await fetch(`${baseUrl}/schema.json`);
  if (!res.ok) {
    throw new Error(`schema fetch failed: HTTP ${res.status}`);
  }
  return (await res.json()) as ControlSchema;
}

export function appliesTo(field: FieldSchema, scene: SceneName): boolean {
  return field.scenes.includes(scene);
}

/** Controls to render for a scene, in the schema's field order. */
export function controlsFor(
  schema: ControlSchema,
  scene: SceneName,
): ControlDescriptor[] {
  const out: ControlDescriptor[] = [];
  for (const [name, field] of Object.entries(schema.fields)) {
    if (!appliesTo(field, scene)) {
      continue;
    }
    if (field.kind === "choice") {
      const choices = field.choices_by_scene[scene] ?? [];
      if (choices.length === 0) {
        continue;
      }
      out.push({ name, field, choices });
    } else {
      out.push({ name, field });
    }
  }
  return out;
}

/** Machine ids a mask control can offer, straight from the schema range. */
export function maskMachineIds(field: FieldSchema): number[] {
  if (field.kind !== "mask") {
    throw new Error(`not a mask field: ${field.kind}`);
  }
  const ids = [];
  for (let m = field.min; m <= field.max; m += 1) {
    ids.push(m);
  }
  return ids;
}
