#!/usr/bin/env python3
"""Export the bundled MATPOWER case files under data/.

case14, case118 and case300 come from the PYPOWER distribution.
case1354pegase is rebuilt from the pandapower JSON network: line and
transformer reactances are converted to per-unit on a 100 MVA base, which is
all the DC model needs.

usage: export_cases.py PYPOWER_DIR PANDAPOWER_DIR OUT_DIR
"""
import json
import math
import sys
from pathlib import Path


def fmt_row(values):
    return "\t" + "\t".join(repr(float(v)) if not float(v).is_integer() else str(int(v)) for v in values) + ";"


def write_case(path, name, base_mva, bus, gen, branch):
    lines = [f"function mpc = {name}", f"%{name.upper()}  DC subset exported for topology studies.", "",
             "%% MATPOWER Case Format : Version 2", "mpc.version = '2';", "",
             "%% system MVA base", f"mpc.baseMVA = {base_mva};", "",
             "%% bus data", "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
             "mpc.bus = ["]
    lines += [fmt_row(r) for r in bus] + ["];", "", "%% generator data",
              "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin", "mpc.gen = ["]
    lines += [fmt_row(r) for r in gen] + ["];", "", "%% branch data",
              "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax",
              "mpc.branch = ["]
    lines += [fmt_row(r) for r in branch] + ["];", ""]
    Path(path).write_text("\n".join(lines))


def export_pypower(pypower_dir, out_dir):
    sys.path.insert(0, str(pypower_dir))
    import importlib
    for name in ("case14", "case118", "case300"):
        mod = importlib.import_module(f"pypower.{name}")
        c = getattr(mod, name)()
        write_case(Path(out_dir) / f"{name}.m", name, c["baseMVA"],
                   c["bus"][:, :13].tolist(), c["gen"][:, :10].tolist(), c["branch"][:, :13].tolist())


def frame(net, key):
    v = net[key]["_object"]
    v = json.loads(v) if isinstance(v, str) else v
    return [dict(zip(v["columns"], row)) for row in v["data"]], v["index"]


def export_pegase(pandapower_dir, out_dir):
    src = Path(pandapower_dir) / "pandapower/networks/power_system_test_case_jsons/case1354pegase.json"
    net = json.loads(json.load(open(src))["_object"]) if isinstance(json.load(open(src))["_object"], str) \
        else json.load(open(src))["_object"]
    base = float(net["sn_mva"])
    buses, bus_index = frame(net, "bus")
    vn = {idx: b["vn_kv"] for idx, b in zip(bus_index, buses)}
    number = {idx: idx + 1 for idx in bus_index}
    pd = {idx: 0.0 for idx in bus_index}
    for ld, _ in zip(*frame(net, "load")):
        if ld["in_service"]:
            pd[ld["bus"]] += ld["p_mw"] * ld["scaling"]
    for sg, _ in zip(*frame(net, "sgen")):
        if sg["in_service"]:
            pd[sg["bus"]] -= sg["p_mw"] * sg["scaling"]
    gens = []
    for g, _ in zip(*frame(net, "gen")):
        if g["in_service"]:
            gens.append([number[g["bus"]], g["p_mw"] * g["scaling"], 0, 9999, -9999, g["vm_pu"], base, 1, 9999, 0])
    ext = frame(net, "ext_grid")[0][0]
    slack_pg = sum(pd.values()) - sum(g[1] for g in gens)
    gens.insert(0, [number[ext["bus"]], slack_pg, 0, 9999, -9999, ext["vm_pu"], base, 1, 9999, 0])
    bus_rows = []
    for idx in bus_index:
        kind = 3 if idx == ext["bus"] else 1
        bus_rows.append([number[idx], kind, pd[idx], 0, 0, 0, 1, 1, 0, vn[idx], 1, 1.1, 0.9])
    branch_rows = []
    for ln, _ in zip(*frame(net, "line")):
        zbase = vn[ln["from_bus"]] ** 2 / base
        x = ln["x_ohm_per_km"] * ln["length_km"] / ln["parallel"] / zbase
        r = ln["r_ohm_per_km"] * ln["length_km"] / ln["parallel"] / zbase
        branch_rows.append([number[ln["from_bus"]], number[ln["to_bus"]], r, x, 0, 0, 0, 0, 0, 0,
                            1 if ln["in_service"] else 0, -360, 360])
    for tr, _ in zip(*frame(net, "trafo")):
        zk = tr["vk_percent"] / 100.0 * base / tr["sn_mva"]
        rk = tr["vkr_percent"] / 100.0 * base / tr["sn_mva"]
        ratio = (tr["vn_lv_kv"] / vn[tr["lv_bus"]]) ** 2
        x = math.sqrt(max(zk ** 2 - rk ** 2, 0.0)) * ratio / tr["parallel"]
        branch_rows.append([number[tr["hv_bus"]], number[tr["lv_bus"]], rk * ratio, x, 0, 0, 0, 0, 0, 0,
                            1 if tr["in_service"] else 0, -360, 360])
    write_case(Path(out_dir) / "case1354pegase.m", "case1354pegase", base, bus_rows, gens, branch_rows)


if __name__ == "__main__":
    if len(sys.argv) != 4:
        sys.exit(__doc__)
    export_pypower(sys.argv[1], sys.argv[3])
    export_pegase(sys.argv[2], sys.argv[3])
