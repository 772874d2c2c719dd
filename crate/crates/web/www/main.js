import init, { closedForm, sweepClosedForm, compareMonteCarlo } from "./pkg/insider_web.js";

const FIELDS = ["M", "rho", "mu", "sigma", "T"];
const $ = (id) => document.getElementById(id);

function params() {
  return FIELDS.map((f) => Number($(f).value));
}

function fmt(x) {
  if (x === null || x === undefined) return "";
  if (typeof x !== "number") return String(x);
  return Math.abs(x) >= 1e-4 && Math.abs(x) < 1e6 ? x.toFixed(6) : x.toExponential(4);
}

function table(headers, rows, rowClass = () => "") {
  const head = `<tr>${headers.map((h) => `<th>${h}</th>`).join("")}</tr>`;
  const body = rows
    .map((r) => `<tr class="${rowClass(r)}">${r.cells.map((c) => `<td>${fmt(c)}</td>`).join("")}</tr>`)
    .join("");
  return `<table>${head}${body}</table>`;
}

function show(id, fn) {
  try {
    $(id).innerHTML = fn();
  } catch (e) {
    $(id).innerHTML = `<p class="error">${e.message ?? e}</p>`;
  }
}

function renderClosedForm() {
  show("closed-form", () => {
    const c = JSON.parse(closedForm(...params()));
    return table(
      ["regime", "honest", "Skorokhod", "forward", "forward − honest", "ordering"],
      [{ cells: [c.regime, c.honest, c.skorokhod, c.forward, c.gap_forward_minus_honest, c.ordering_pass ? "holds" : "violated"], ok: c.ordering_pass }],
      (r) => (r.ok ? "" : "fail"),
    );
  });
}

function renderSweep() {
  show("sweep", () => {
    const field = $("sweep-field").value;
    const out = JSON.parse(sweepClosedForm(...params(), field, $("sweep-grid").value));
    const rows = out.rows.map((r) =>
      r.error
        ? { cells: [r.value, r.error, "", "", "", ""], ok: false }
        : { cells: [r.value, r.regime, r.honest, r.skorokhod, r.forward, r.forward / r.honest], ok: r.ordering_pass },
    );
    return table([out.field, "regime", "honest", "Skorokhod", "forward", "forward / honest"], rows, (r) => (r.ok ? "" : "fail"));
  });
}

function renderMonteCarlo() {
  $("mc").textContent = "running…";
  // Let the status text paint before the synchronous simulation blocks.
  setTimeout(() =>
    show("mc", () => {
      const r = JSON.parse(compareMonteCarlo(...params(), Number($("mc-samples").value), $("mc-seed").value));
      return table(
        ["trader", "closed form", "estimate", "std. error", "z"],
        [
          { cells: ["honest", r.cf_honest, r.mc_honest, r.mc_honest_se, r.z_honest] },
          { cells: ["Skorokhod", r.cf_skorokhod, r.mc_sk, r.mc_sk_se, r.z_sk] },
          { cells: ["forward", r.cf_forward, r.mc_rs, r.mc_rs_se, r.z_rs] },
        ],
        (row) => (Math.abs(row.cells[4]) > 3 ? "fail" : ""),
      ) + `<p>Skorokhod samples exactly zero: ${(100 * r.zero_fraction).toFixed(2)}%</p>`;
    }), 0);
}

await init();
for (const f of FIELDS) {
  const input = $(f);
  const output = document.querySelector(`output[for="${f}"]`);
  const sync = () => {
    output.textContent = input.value;
    renderClosedForm();
  };
  input.addEventListener("input", sync);
  output.textContent = input.value;
}
$("sweep-run").addEventListener("click", renderSweep);
$("mc-run").addEventListener("click", renderMonteCarlo);
renderClosedForm();
renderSweep();
