// DOM chrome around the canvas: session command buttons, status badges,
// and transient toasts.

import { ButtonStates, Connection, Toast } from "./state.js";
import { CommandKind } from "./protocol.js";

export interface UiElements {
  buttons: Record<CommandKind, HTMLButtonElement>;
  modeBadge: HTMLElement;
  gripperBadge: HTMLElement;
  connBadge: HTMLElement;
  statesBadge: HTMLElement;
  toastBox: HTMLElement;
  banner: HTMLElement;
}

const KINDS: CommandKind[] = ["start", "stop", "open", "close", "replay"];

export function buildUi(root: HTMLElement, onCommand: (kind: CommandKind) => void): UiElements {
  const bar = document.createElement("div");
  bar.className = "toolbar";
  const buttons = {} as Record<CommandKind, HTMLButtonElement>;
  for (const kind of KINDS) {
    const b = document.createElement("button");
    b.textContent = kind;
    b.disabled = true;
    b.onclick = () => onCommand(kind);
    bar.appendChild(b);
    buttons[kind] = b;
  }

  const badges = document.createElement("div");
  badges.className = "badges";
  const make = (label: string) => {
    const el = document.createElement("span");
    el.className = "badge";
    el.textContent = label;
    badges.appendChild(el);
    return el;
  };
  const connBadge = make("connecting");
  const modeBadge = make("mode: -");
  const gripperBadge = make("gripper: -");
  const statesBadge = make("states: 0");

  const toastBox = document.createElement("div");
  toastBox.className = "toasts";
  const banner = document.createElement("div");
  banner.className = "banner hidden";
  banner.textContent = "engine unreachable - retrying";

  root.append(banner, bar, badges, toastBox);
  return { buttons, modeBadge, gripperBadge, connBadge, statesBadge, toastBox, banner };
}

export function updateChrome(ui: UiElements, mode: string | undefined,
                             gripper: string | undefined, states: number | undefined,
                             connection: Connection, enabled: ButtonStates,
                             toasts: Toast[]): void {
  ui.modeBadge.textContent = `mode: ${mode ?? "-"}`;
  ui.modeBadge.dataset.value = mode ?? "";
  ui.gripperBadge.textContent = `gripper: ${gripper ?? "-"}`;
  ui.statesBadge.textContent = `states: ${states ?? 0}`;
  ui.connBadge.textContent = connection;
  ui.connBadge.dataset.value = connection;
  ui.banner.classList.toggle("hidden", connection === "open");
  for (const kind of KINDS) {
    ui.buttons[kind].disabled = !enabled[kind];
  }
  ui.toastBox.replaceChildren(...toasts.map((t) => {
    const el = document.createElement("div");
    el.className = `toast ${t.kind}`;
    el.textContent = t.text;
    return el;
  }));
}
