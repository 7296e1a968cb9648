import { LeafApi, resolveApiBase } from "./api.js";
import { mount } from "./app.js";

const api = new LeafApi(resolveApiBase(window as Window & { LEAFASSIST_API?: string }));
mount(document, api);
