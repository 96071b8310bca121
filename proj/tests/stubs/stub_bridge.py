#!/usr/bin/env python3
"""Test double for the external evaluator.

Usage: stub_bridge.py MODE [LOG]
Appends the request line to LOG when given, so tests can count spawns.
"""
import json
import sys
import time

mode = sys.argv[1]
request = sys.stdin.readline()
if len(sys.argv) > 2:
    with open(sys.argv[2], "a") as log:
        log.write(request if request.endswith("\n") else request + "\n")

ids = json.loads(request)["beam_ids"]
if mode == "half":
    print(json.dumps({"value": 0.5}))
elif mode == "sum":
    print(json.dumps({"value": sum(ids) / 1000.0}))
elif mode == "out_of_range":
    print(json.dumps({"value": 1.7}))
elif mode == "malformed":
    print("value=0.5")
elif mode == "missing":
    print(json.dumps({"score": 0.5}))
elif mode == "fail":
    sys.stderr.write("detector crashed\n")
    sys.exit(3)
elif mode == "sleep":
    time.sleep(30)
    print(json.dumps({"value": 0.5}))
elif mode == "chatty":
    print("")
    print(json.dumps({"value": 0.25}))
    print("trailing noise")
else:
    sys.exit(64)
