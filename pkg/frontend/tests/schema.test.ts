import { describe, expect, it } from "vitest";

import type { ControlSchema } from "../src/protocol.js";
import { appliesTo, controlsFor, maskMachineIds } from "../src/schema.js";

const schema: ControlSchema = {
  scenes: ["alpha", "beta"],
  fields: {
    speed: { kind: "int", min: 0, max: 3, scenes: ["alpha", "beta"] },
    difficulty: { kind: "int", min: 0, max: 4, scenes: ["beta"] },
    pedestrians_enabled: { kind: "bool", scenes: ["alpha", "beta"] },
    spawn: {
      kind: "choice",
      choices_by_scene: { alpha: ["gate"], beta: [] },
      scenes: ["alpha", "beta"],
    },
    machine_mask_override: {
      kind: "mask",
      min: 0,
      max: 2,
      scenes: ["beta"],
    },
  },
  protocol: {
    tick_rate: 90,
    default_snapshot_rate: 10,
    message_types: [],
  },
};

describe("scene scoping", () => {
  it("hides controls whose field excludes the scene", () => {
    const names = controlsFor(schema, "alpha").map((c) => c.name);
    expect(names).toContain("speed");
    expect(names).not.toContain("difficulty");
    expect(names).not.toContain("machine_mask_override");
  });

  it("offers scoped controls where the schema allows them", () => {
    const names = controlsFor(schema, "beta").map((c) => c.name);
    expect(names).toContain("difficulty");
    expect(names).toContain("machine_mask_override");
  });

  it("drops choice controls with no choices for the scene", () => {
    expect(controlsFor(schema, "alpha").some((c) => c.name === "spawn")).toBe(
      true,
    );
    expect(controlsFor(schema, "beta").some((c) => c.name === "spawn")).toBe(
      false,
    );
  });

  it("answers scope queries per field", () => {
    expect(appliesTo(schema.fields.difficulty!, "alpha")).toBe(false);
    expect(appliesTo(schema.fields.difficulty!, "beta")).toBe(true);
  });
});

describe("ranges come from the schema alone", () => {
  it("passes the schema range through to the descriptor", () => {
    const speed = controlsFor(schema, "alpha").find((c) => c.name === "speed");
    expect(speed?.field).toMatchObject({ min: 0, max: 3 });
  });

  it("expands the mask range into machine ids", () => {
    expect(maskMachineIds(schema.fields.machine_mask_override!)).toEqual([
      0, 1, 2,
    ]);
    expect(() => maskMachineIds(schema.fields.speed!)).toThrow(/not a mask/);
  });
});
