let container: HTMLElement | null = null;

function ensureContainer(): HTMLElement {
    if (!container || !document.body.contains(container)) {
        container = document.createElement("div");
        container.className = "toast-container";
        document.body.appendChild(container);
    }
    return container;
}

/** Transient notification; removed after ttl ms. */
export function showToast(message: string, ttl = 6000): HTMLElement {
    const toast = document.createElement("div");
    toast.className = "toast";
    toast.textContent = message;
    ensureContainer().appendChild(toast);
    if (ttl > 0) {
        setTimeout(() => toast.remove(), ttl);
    }
    return toast;
}
