#!/usr/bin/env python3
"""Validates real CLI and HTTP outputs against the JSON schemas in schemas/.

Usage: schema_check.py <majutsu executable> <schemas dir>
"""

import json
import socket
import subprocess
import sys
import tempfile
import time
import urllib.error
import urllib.request
from pathlib import Path

from jsonschema import Draft202012Validator
from referencing import Registry, Resource

BASE = "https://majutsu.local/schemas/"


def load_registry(schema_dir):
    schemas = {}
    for path in sorted(Path(schema_dir).glob("*.schema.json")):
        doc = json.loads(path.read_text())
        Draft202012Validator.check_schema(doc)
        schemas[path.name] = doc
    registry = Registry().with_resources(
        (doc["$id"], Resource.from_contents(doc)) for doc in schemas.values()
    )
    return schemas, registry


class Checker:
    def __init__(self, schema_dir):
        self.schemas, self.registry = load_registry(schema_dir)
        self.failures = []
        self.count = 0

    def validator(self, name, ref=None):
        schema = {"$ref": BASE + name + (f"#/$defs/{ref}" if ref else "")}
        return Draft202012Validator(schema, registry=self.registry)

    def valid(self, what, instance, name, ref=None):
        self.count += 1
        errors = sorted(self.validator(name, ref).iter_errors(instance), key=lambda e: list(e.path))
        if errors:
            e = errors[0]
            self.failures.append(f"{what}: {e.message} at {'/'.join(map(str, e.path))}")

    def invalid(self, what, instance, name, ref=None):
        self.count += 1
        if self.validator(name, ref).is_valid(instance):
            self.failures.append(f"{what}: accepted by {name}{'#' + ref if ref else ''}")


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def http(method, url, body=None, content_type="application/json"):
    data = None
    if body is not None:
        data = body.encode() if isinstance(body, str) and content_type.startswith("text/") else json.dumps(body).encode()
    req = urllib.request.Request(url, data=data, method=method)
    if data is not None:
        req.add_header("Content-Type", content_type)
    try:
        with urllib.request.urlopen(req, timeout=30) as r:
            return r.status, json.loads(r.read())
    except urllib.error.HTTPError as e:
        return e.code, json.loads(e.read())


def main():
    cli, schema_dir = sys.argv[1], sys.argv[2]
    c = Checker(schema_dir)
    with tempfile.TemporaryDirectory(prefix="majutsu_schema_") as tmp:
        tmp = Path(tmp)
        run = tmp / "run"
        subprocess.run([cli, "run", "--offline", "--seed", "3", "--out", str(run), "neon cyberpunk harbor"],
                       check=True, stdout=subprocess.DEVNULL)
        design = json.loads((run / "design.json").read_text())
        scene = json.loads((run / "scene.majutsu.json").read_text())
        report = json.loads((run / "report.json").read_text())
        c.valid("design.json", design, "design.schema.json")
        c.valid("scene.majutsu.json", scene, "scene.schema.json")
        c.valid("report.json", report, "report.schema.json")

        # The schemas must not be vacuous.
        c.invalid("design without skymap", {k: v for k, v in design.items() if k != "skymap"}, "design.schema.json")
        c.invalid("scene with an unknown key", {**scene, "extra": 1}, "scene.schema.json")
        c.invalid("scene with three layers", {**scene, "layers": scene["layers"][:3]}, "scene.schema.json")
        c.invalid("unknown op", {"op": "explode", "instance_id": "x"}, "edit_command.schema.json")
        c.invalid("move without target", {"op": "move", "d_translation": [1, 2]}, "edit_command.schema.json")
        c.invalid("winner C", {"dimension": "LA", "image_a": "a/1", "image_b": "b/1", "winner": "C"},
                  "comparison_record.schema.json")

        # Edited document from the CLI: history entries hold commands.
        edited = tmp / "edited"
        subprocess.run([cli, "edit", str(run / "scene.majutsu.json"), "--out", str(edited),
                        "-c", "move bldg_0001 by (5,0,0) rotate 0.5 scale 1.1",
                        "-c", "replace water with asphalt_01",
                        "-c", '{"op":"edit","instance_id":"bldg_0002","patch":{"tint":"#aa3300"}}',
                        "-c", "delete bldg_0003", "--undo", "2", "--redo", "1"],
                       check=True, stdout=subprocess.DEVNULL)
        edited_docs = list(edited.glob("*.majutsu.json")) if edited.is_dir() else []
        if edited.is_file():
            edited_docs = [edited]
        if not edited_docs:
            c.failures.append("edit produced no document under " + str(edited))
        for p in edited_docs:
            doc = json.loads(p.read_text())
            c.valid("edited scene", doc, "scene.schema.json")
            if len(doc["edit_log"]) != 7:
                c.failures.append(f"edited scene has {len(doc['edit_log'])} log entries, expected 7")
            for entry in doc["edit_log"]:
                c.valid("log command", entry["command"], "edit_command.schema.json")

        # HTTP API against a live server.
        port = free_port()
        url = f"http://127.0.0.1:{port}"
        state = tmp / "state"
        server = subprocess.Popen([cli, "serve", "--offline", "--bind", "127.0.0.1", "--port", str(port),
                                   "--state", str(state)], stdout=subprocess.DEVNULL, stderr=subprocess.PIPE)
        try:
            for _ in range(200):
                try:
                    status, health = http("GET", url + "/healthz")
                    break
                except (urllib.error.URLError, ConnectionError):
                    time.sleep(0.05)
            else:
                raise RuntimeError("server did not come up")
            c.valid("GET /healthz", health, "api.schema.json", "health")

            create = {"path": str(run / "scene.majutsu.json")}
            c.valid("create request", create, "api.schema.json", "create_session_request")
            status, created = http("POST", url + "/sessions", create)
            c.valid("POST /sessions", created, "api.schema.json", "session_created")
            if status != 201:
                c.failures.append(f"POST /sessions returned {status}")
            sid = created["id"]
            status, listing = http("GET", url + "/sessions")
            c.valid("GET /sessions", listing, "api.schema.json", "session_list")

            requests = [
                {"command": "delete bldg_0001", "base_revision": 1},
                {"op": "move", "instance_id": "bldg_0002", "d_translation": [3, -4, 0], "d_yaw": 0.25, "d_scale": 1.0},
                {"command": {"op": "replace", "target": {"layer": "water"}, "material_id": "asphalt_01"}},
                "edit bldg_0004 set tint=#112233",
            ]
            for body in requests:
                c.valid("command request", body, "api.schema.json", "command_request")
                status, out = http("POST", f"{url}/sessions/{sid}/commands", body)
                c.valid(f"POST commands {json.dumps(body)[:40]}", out, "api.schema.json", "command_outcome")
                if status != 200:
                    c.failures.append(f"command {body} returned {status}: {out}")
            status, out = http("POST", f"{url}/sessions/{sid}/commands", "move bldg_0005 by (1,1)", "text/plain")
            c.valid("text/plain command", out, "api.schema.json", "command_outcome")
            status, out = http("POST", f"{url}/sessions/{sid}/undo", {})
            c.valid("POST undo", out, "api.schema.json", "command_outcome")
            status, out = http("POST", f"{url}/sessions/{sid}/redo", {})
            c.valid("POST redo", out, "api.schema.json", "command_outcome")

            status, ev = http("GET", f"{url}/sessions/{sid}/events?since=1&timeout=0")
            c.valid("GET events", ev, "api.schema.json", "events")
            if len(ev["events"]) != 7:
                c.failures.append(f"expected 7 events, got {len(ev['events'])}")
            status, live = http("GET", f"{url}/sessions/{sid}/scene")
            c.valid("GET scene", live, "scene.schema.json")

            status, err = http("POST", f"{url}/sessions/{sid}/commands", {"command": "delete bldg_0006", "base_revision": 1})
            c.valid("stale revision error", err, "api.schema.json", "error")
            if status != 409:
                c.failures.append(f"stale revision returned {status}")
            status, err = http("POST", f"{url}/sessions/{sid}/commands", "delete ghost", "text/plain")
            c.valid("unknown instance error", err, "api.schema.json", "error")
            if status != 404:
                c.failures.append(f"unknown instance returned {status}")
            status, err = http("POST", f"{url}/sessions/{sid}/commands", "teleport x", "text/plain")
            c.valid("parse error", err, "api.schema.json", "error")
            status, err = http("GET", f"{url}/sessions/s9999/scene")
            c.valid("missing session", err, "api.schema.json", "error")

            pool = {"methods": {m: [f"{m}/{i}" for i in range(4)] for m in ("ours", "baseline", "ablation")}}
            c.valid("images request", pool, "api.schema.json", "images_request")
            status, reg = http("POST", url + "/eval/images", pool)
            c.valid("POST /eval/images", reg, "api.schema.json", "images_registered")
            status, sched = http("GET", url + "/eval/schedule?dimension=MTF&judge=j1")
            c.valid("GET /eval/schedule", sched, "api.schema.json", "schedule")
            text = json.dumps(sched)
            for m in pool["methods"]:
                if m in text:
                    c.failures.append(f"schedule leaks method name {m}")
            for pair in sched["pairs"][:3]:
                verdict = {"pair_id": pair["pair_id"], "winner": "A", "judge": "j1"}
                c.valid("verdict request", verdict, "api.schema.json", "verdict_request")
                status, v = http("POST", url + "/eval/verdicts", verdict)
                c.valid("POST /eval/verdicts", v, "api.schema.json", "verdict")
            raw = {"dimension": "LA", "image_a": "ours/0", "image_b": "baseline/1", "winner": "B",
                   "judge": "j2", "timestamp": 5}
            c.valid("raw verdict request", raw, "api.schema.json", "verdict_request")
            status, v = http("POST", url + "/eval/verdicts", raw)
            c.valid("POST raw verdict", v, "api.schema.json", "verdict")
            status, board = http("GET", url + "/eval/leaderboard")
            c.valid("GET /eval/leaderboard", board, "api.schema.json", "leaderboard")
            if board["records"] != 4:
                c.failures.append(f"leaderboard counts {board['records']} records, expected 4")
        finally:
            server.terminate()
            server.wait(timeout=10)

        lines = (state / "eval" / "records.jsonl").read_text().splitlines()
        for line in lines:
            c.valid("records.jsonl line", json.loads(line), "api.schema.json", "record_line")
        records = tmp / "records.jsonl"
        records.write_text("".join(json.dumps(json.loads(l)["record"]) + "\n" for l in lines))
        out = subprocess.run([cli, "eval", "rank", str(records)], check=True, capture_output=True, text=True)
        c.valid("eval rank output", json.loads(out.stdout), "leaderboard.schema.json")

    for f in c.failures:
        print("FAIL", f)
    print(f"{c.count - len(c.failures)}/{c.count} schema checks passed")
    return 1 if c.failures else 0


if __name__ == "__main__":
    sys.exit(main())
