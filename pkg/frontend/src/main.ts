import { ConsoleController } from "./controller.js";
import { GatewayClient } from "./gateway.js";
import { ViewModel } from "./model.js";
import { Renderer } from "./render.js";

const operator = new URLSearchParams(location.search).get("operator") ?? "console";
const gateway = new GatewayClient(location.origin, { operator });
const model = new ViewModel();
const controller = new ConsoleController(gateway, model);
const renderer = new Renderer(document.getElementById("app")!, controller);

controller.start();
renderer.render();
