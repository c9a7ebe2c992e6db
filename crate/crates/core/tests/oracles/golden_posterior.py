"""Golden preference ratios and posterior for a fixed 10-item scene.

The simulated user picks a dialogue state from a finite action space with
probability softmax(sign * beta * compat(state, item)), sign +1 for the like
hypothesis and -1 for dislike. compat adds +1 per matching slot, -1 per
conflicting slot and 0 for slots the item lacks.

Writes ../fixtures/golden_posterior.json. Values are printed with 25
significant digits from a 50-digit evaluation.
"""
import json
from pathlib import Path

from mpmath import mp, mpf, exp, log

mp.dps = 50

ITEMS = {
    "i01": {"color": "red", "type": "jacket", "size": "m"},
    "i02": {"color": "red", "type": "shirt", "size": "s"},
    "i03": {"color": "blue", "type": "jacket", "size": "m"},
    "i04": {"color": "blue", "type": "shirt"},
    "i05": {"color": "red", "type": "jacket"},
    "i06": {"color": "green", "size": "l"},
    "i07": {"type": "jacket", "size": "s"},
    "i08": {"color": "black", "type": "coat", "size": "m"},
    "i09": {"color": "red", "type": "coat", "size": "l"},
    "i10": {"color": "green", "type": "shirt", "size": "m"},
}

ACTIONS = [
    ("REQUEST:GET", {"color": "red"}),
    ("REQUEST:GET", {"color": "blue"}),
    ("REQUEST:GET", {"color": "green"}),
    ("REQUEST:GET", {"type": "jacket"}),
    ("REQUEST:GET", {"type": "shirt"}),
    ("REQUEST:GET", {"size": "m"}),
    ("REQUEST:GET", {"color": "red", "type": "jacket"}),
    ("OTHER", {}),
]

OBSERVED = [
    ("REQUEST:GET", {"color": "red"}),
    ("REQUEST:GET", {"type": "jacket"}),
    ("OTHER", {}),
    ("REQUEST:GET", {"color": "red", "type": "jacket"}),
]

BETA = mpf(1)


def wire(state):
    intent, slots = state
    if not slots:
        return intent
    return intent + " | " + "; ".join(f"{k}={v}" for k, v in sorted(slots.items()))


def compat(state, item):
    total = 0
    for slot, value in state[1].items():
        if slot in item:
            total += 1 if item[slot] == value else -1
    return total


def loglik(state, item, sign):
    z = sum(exp(sign * BETA * compat(a, item)) for a in ACTIONS)
    return sign * BETA * compat(state, item) - log(z)


def s(x):
    return mp.nstr(x, 25)


def main():
    ids = sorted(ITEMS)
    turns = []
    cum = {i: mpf(0) for i in ids}
    for state in OBSERVED:
        for i in ids:
            cum[i] += loglik(state, ITEMS[i], 1) - loglik(state, ITEMS[i], -1)
        ranking = sorted(ids, key=lambda i: (-cum[i], i))
        turns.append({"log_ratio": {i: s(cum[i]) for i in ids}, "ranking": ranking})

    prior = mpf(1) / len(ids)
    joint = {i: log(prior) + sum(loglik(a, ITEMS[i], 1) for a in OBSERVED) for i in ids}
    norm = log(sum(exp(v) for v in joint.values()))
    posterior = {i: exp(joint[i] - norm) for i in ids}
    out = {
        "beta": 1.0,
        "scene": {"scene_id": "golden", "items": [{"item_id": i, "attributes": ITEMS[i]} for i in ids]},
        "action_space": [wire(a) for a in ACTIONS],
        "observed": [wire(a) for a in OBSERVED],
        "turns": turns,
        "posterior": {i: s(posterior[i]) for i in ids},
        "posterior_ranking": sorted(ids, key=lambda i: (-posterior[i], i)),
    }
    path = Path(__file__).resolve().parent.parent / "fixtures" / "golden_posterior.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print("wrote", path)


if __name__ == "__main__":
    main()
