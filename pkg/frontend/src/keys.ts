// Physical-key to logical-event bindings. Defaults follow the task screen:
// number row types the alpha keys, spacebar is the word boundary, backspace
// undoes one gesture, tab cycles the queued candidate. Anything else is
// ignored rather than rejected.

import type { UiKeyAction } from "./protocol";

const DIGIT = /^[1-9]$/;

// Layouts with numeric labels (the 2-5 key ones use "1","2","4","5"-style
// names) bind each label to its own digit key, so the row matches what the
// echo line shows. Layouts with non-numeric labels (the 6-8 key ones use
// Roman numerals) bind digits positionally: 1 is the first alpha key.
export function keyBindings(alphaLabels: readonly string[]): Map<string, UiKeyAction> {
  const map = new Map<string, UiKeyAction>();
  const numeric = alphaLabels.filter((l) => DIGIT.test(l));
  if (numeric.length === alphaLabels.length && alphaLabels.length > 0) {
    for (const label of alphaLabels) map.set(label, { event: "char", label });
  } else {
    alphaLabels.forEach((label, i) => {
      if (i < 9) map.set(String(i + 1), { event: "char", label });
    });
  }
  map.set(" ", { event: "space" });
  map.set("Backspace", { event: "undo" });
  map.set("Tab", { event: "select" });
  return map;
}

export function actionFor(
  bindings: Map<string, UiKeyAction>,
  physicalKey: string,
): UiKeyAction | null {
  return bindings.get(physicalKey) ?? null;
}
