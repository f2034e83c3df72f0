import { ApiClient } from "./api.js";
import { librarianView } from "./librarian.js";
import { studentView } from "./student.js";

// Hash router: #/librarian/<room> and #/student/<room>; anything else lists
// the rooms with links to both views.

const api = new ApiClient("");

let teardown: (() => void) | null = null;

async function landing(host: HTMLElement): Promise<void> {
    const page = document.createElement("div");
    page.className = "landing";
    page.innerHTML = "<h2>Rooms</h2><ul class='room-list'></ul>";
    const list = page.querySelector(".room-list") as HTMLUListElement;
    try {
        const rooms = await api.listRooms();
        if (!rooms.length) {
            list.innerHTML = "<li>no rooms yet — create one via POST /rooms or serve --demo</li>";
        }
        for (const room of rooms) {
            const li = document.createElement("li");
            li.innerHTML =
                `<strong>${room.room_id}</strong> ` +
                `<a href="#/librarian/${room.room_id}">librarian</a> · ` +
                `<a href="#/student/${room.room_id}">student</a>`;
            list.appendChild(li);
        }
    } catch (err) {
        list.innerHTML = `<li>cannot reach the service: ${err}</li>`;
    }
    host.replaceChildren(page);
}

function route(): void {
    const host = document.getElementById("app");
    if (!host) return;
    teardown?.();
    teardown = null;
    const match = location.hash.match(/^#\/(librarian|student)\/([^/]+)$/);
    if (!match) {
        void landing(host);
        return;
    }
    const [, view, roomId] = match;
    if (view === "librarian") {
        const page = librarianView(api, roomId);
        teardown = () => page.destroy();
        host.replaceChildren(page.el);
    } else {
        const page = studentView(api, roomId);
        teardown = () => page.stop();
        host.replaceChildren(page.el);
    }
}

window.addEventListener("hashchange", route);
window.addEventListener("load", route);
