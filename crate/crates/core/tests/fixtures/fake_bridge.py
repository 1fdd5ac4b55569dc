#!/usr/bin/env python3
"""Scripted metric bridge for tests: a mean-pixel model (100 * mean).

Speaks the line-delimited JSON protocol on stdin/stdout. Options:
  --name NAME         descriptor name (default "fake-mean")
  --no-gradient       advertise supports_gradient = false
  --exit-after N      exit abruptly after answering N requests
  --wrong-id          answer with id + 1000
  --short-gradient    return a gradient with one value missing
"""
import array
import base64
import json
import sys


def decode(image):
    raw = base64.b64decode(image["data"])
    values = array.array("f")
    values.frombytes(raw)
    if sys.byteorder != "little":
        values.byteswap()
    n = image["height"] * image["width"] * image["channels"]
    if len(values) != n:
        raise ValueError("payload has %d values, shape needs %d" % (len(values), n))
    return values


def encode(shape, values):
    out = array.array("f", values)
    if sys.byteorder != "little":
        out.byteswap()
    return dict(shape, data=base64.b64encode(out.tobytes()).decode("ascii"))


def main(argv):
    name = "fake-mean"
    gradient = True
    exit_after = None
    wrong_id = False
    short_gradient = False
    args = iter(argv)
    for arg in args:
        if arg == "--name":
            name = next(args)
        elif arg == "--no-gradient":
            gradient = False
        elif arg == "--exit-after":
            exit_after = int(next(args))
        elif arg == "--wrong-id":
            wrong_id = True
        elif arg == "--short-gradient":
            short_gradient = True

    answered = 0
    for line in sys.stdin:
        if exit_after is not None and answered >= exit_after:
            sys.exit(3)
        try:
            req = json.loads(line)
            rid = req.get("id")
        except ValueError as e:
            reply = {"id": None, "ok": False, "error": "malformed request: %s" % e}
        else:
            op = req.get("op")
            try:
                if op == "info":
                    reply = {"id": rid, "ok": True, "info": {
                        "name": name, "score_lo": 0.0, "score_hi": 100.0,
                        "supports_gradient": gradient}}
                elif op == "score":
                    values = decode(req["image"])
                    reply = {"id": rid, "ok": True, "score": 100.0 * sum(values) / len(values)}
                elif op == "gradient" and gradient:
                    img = req["image"]
                    values = decode(img)
                    n = len(values) - (1 if short_gradient else 0)
                    shape = {k: img[k] for k in ("height", "width", "channels")}
                    if short_gradient:
                        shape["width"] = img["width"]
                    reply = {"id": rid, "ok": True,
                             "gradient": encode(shape, [100.0 / len(values)] * n)}
                else:
                    reply = {"id": rid, "ok": False, "error": "unsupported op %r" % op}
            except (KeyError, ValueError, TypeError) as e:
                reply = {"id": rid, "ok": False, "error": "bad request: %s" % e}
        if wrong_id and isinstance(reply.get("id"), int):
            reply["id"] += 1000
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()
        answered += 1


if __name__ == "__main__":
    main(sys.argv[1:])
