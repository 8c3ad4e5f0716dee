import { StudyApi } from "./api.js";
import { StudySession } from "./session.js";
import { StudyView } from "./ui.js";

function askParticipant(root: HTMLElement): void {
    const form = document.createElement("form");
    form.className = "enroll";
    const label = document.createElement("label");
    label.textContent = "Participant name";
    const input = document.createElement("input");
    input.name = "participant";
    input.required = true;
    input.autofocus = true;
    const go = document.createElement("button");
    go.type = "submit";
    go.textContent = "Start";
    label.append(input);
    form.append(label, go);
    form.addEventListener("submit", (ev) => {
        ev.preventDefault();
        const name = input.value.trim();
        if (name) {
            location.search = `?participant=${encodeURIComponent(name)}`;
        }
    });
    root.append(form);
}

const root = document.getElementById("app");
if (root) {
    const participant = new URLSearchParams(location.search).get("participant");
    if (!participant) {
        askParticipant(root);
    } else {
        const api = new StudyApi("");
        const view = new StudyView(root, api, new StudySession(api, participant));
        void view.boot();
    }
}
