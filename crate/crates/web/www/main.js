import init, { error_sweep, dimensions, table_lower_bound } from "./pkg/psdcompress_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function show(id, html) {
  $(id).innerHTML = html;
}

function guard(id, f) {
  try {
    f();
  } catch (e) {
    show(id, `<p class="err">${e.message ?? e}</p>`);
  }
}

function fmt(v) {
  return v === null ? "–" : v.toPrecision(4);
}

function runSweep() {
  show("sw-out", "<p>running…</p>");
  // Let the page repaint before the blocking call.
  setTimeout(() => guard("sw-out", () => {
    const r = JSON.parse(error_sweep(num("sw-dim"), num("sw-x"), num("sw-y"), $("sw-grid").value, num("sw-seeds")));
    const top = Math.max(...r.rows.map((row) => row.median ?? 0), 1e-12);
    const body = r.rows.map((row) => `<tr><td>${row.d}</td><td>${row.accepted}/${r.seeds}</td>
      <td>${fmt(row.median)}</td><td>${fmt(row.max)}</td><td>${fmt(row.effective_epsilon)}</td>
      <td style="text-align:left"><div class="bar" style="width:${(200 * (row.median ?? 0)) / top}px"></div></td></tr>`);
    show("sw-out", `<table><tr><th>d</th><th>accepted</th><th>median error</th><th>max error</th>
      <th>effective ε</th><th></th></tr>${body.join("")}</table>`);
  }), 10);
}

function runDimensions() {
  guard("dm-out", () => {
    const r = JSON.parse(dimensions(num("dm-eps"), num("dm-j"), num("dm-dim"), num("dm-rank"), num("dm-jstar"), num("dm-b")));
    show("dm-out", `<table><tr><th>psd factorization</th><td>${r.psd}</td></tr>
      <tr><th>quantum model</th><td>${r.model}</td></tr>
      <tr><th>spectral tail</th><td>${r.tail}</td></tr></table>`);
  });
}

function runBound() {
  guard("lb-out", () => {
    const r = JSON.parse(table_lower_bound($("lb-table").value, num("lb-eps")));
    show("lb-out", `<pre>column maxima  ${r.column_maxima.join(", ")}
bound          ${r.bound}
with noise     ${r.noisy}</pre>`);
  });
}

await init();
$("sw-run").onclick = runSweep;
$("dm-run").onclick = runDimensions;
$("lb-run").onclick = runBound;
runDimensions();
runBound();
