"""Protocol test double: answers with fixed vectors and logits.

The ECHO_MODE environment variable selects a misbehavior.
"""
import json
import os
import sys
import time
from pathlib import Path

mode = os.environ.get("ECHO_MODE", "ok")
req_path = Path(sys.argv[-1])
lines = [json.loads(l) for l in req_path.read_text().splitlines() if l.strip()]
head = lines[0]
n = len(head["labels"])
pool = [r["id"] for r in lines if r["type"] == "pool"]
evals = [r["id"] for r in lines if r["type"] == "eval"]

if mode == "fail":
    print("boom", file=sys.stderr)
    sys.exit(3)
if mode == "sleep":
    time.sleep(30)

out = req_path.parent / "response"
recs = [{"type": "header", "protocol": "afsl/0" if mode == "version" else "afsl/1",
         "request_id": head["request_id"]}]
for k, sid in enumerate(pool):
    if mode == "omit" and k == 0:
        continue
    en = [float(sid), 0.5, -1.25]
    if mode == "dim" and k == 1:
        en = en[:2]
    logits = [[0.1 * j + sid for j in range(n)], [1.0] * n]
    recs.append({"type": "pool", "id": sid, "en": en, "class_logits": logits})
    if mode == "dup" and k == 0:
        recs.append(recs[-1])
for sid in evals:
    recs.append({"type": "prediction", "id": sid, "labels": [head["labels"][0]]})
recs.append({"type": "status", "timings": {"fine_tune": 0.25, "embedding": 0.5}, "flags": []})
text = "\n".join(json.dumps(r) for r in recs) + "\n"
if mode == "nan":
    text = text.replace("0.5,", "NaN,", 1)
out.write_text(text)
print("some log line")
print(f"RESPONSE {out}")
