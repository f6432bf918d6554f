/**
 * Browser bootstrap: a login/register form, then the listing page for
 * today. Queued events are flushed whenever the connection returns.
 */

import { ApiClient, ApiError } from "./api.js";
import { EventQueue } from "./queue.js";
import { initialModel, singleDay } from "./model.js";
import { ListingController } from "./view.js";

function today(): string {
  return new Date().toISOString().slice(0, 10);
}

function loginForm(root: HTMLElement, onLogin: (api: ApiClient) => void): void {
  const doc = root.ownerDocument;
  const form = doc.createElement("form");
  form.className = "login";
  form.innerHTML = `
    <input name="name" placeholder="user name" autocomplete="username">
    <input name="password" type="password" placeholder="password" autocomplete="current-password">
    <button type="submit" name="login">Log in</button>
    <button type="button" name="register">Register</button>
    <p class="login-error" hidden></p>
  `;
  const name = form.elements.namedItem("name") as HTMLInputElement;
  const password = form.elements.namedItem("password") as HTMLInputElement;
  const registerBtn = form.elements.namedItem("register") as HTMLButtonElement;
  const error = form.querySelector<HTMLElement>(".login-error")!;

  const fail = (err: unknown): void => {
    error.hidden = false;
    error.textContent = err instanceof ApiError ? err.message : "service unreachable";
  };
  const succeed = (api: ApiClient): void => {
    form.remove();
    onLogin(api);
  };

  form.addEventListener("submit", (e) => {
    e.preventDefault();
    const api = new ApiClient("");
    api.login(name.value, password.value).then(() => succeed(api), fail);
  });
  registerBtn.addEventListener("click", () => {
    const api = new ApiClient("");
    api
      .register(name.value, password.value)
      .then(() => api.login(name.value, password.value))
      .then(() => succeed(api), fail);
  });

  root.append(form);
}

function showListing(root: HTMLElement, api: ApiClient): void {
  const queue = new EventQueue((event) => api.postEvent(event));
  window.addEventListener("online", () => void queue.flush());

  const controller = new ListingController(
    root,
    { api, queue },
    initialModel(singleDay(today())),
  );
  void controller.refresh();
}

export function main(root: HTMLElement): void {
  loginForm(root, (api) => showListing(root, api));
}

const mount = document.getElementById("app");
if (mount !== null) main(mount);
