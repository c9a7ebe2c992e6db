"""Authors the 20-dialogue fixture corpus and its manifest.

A small clothing store with five scenes. Twelve dialogues move between
scenes, eight stay put. Statistics in manifest.json are counted here, from
the authored data, and frozen for the ingestion test.

Writes ../fixtures/corpus/{environment,dialogues,manifest}.json.
"""
import json
import random
from pathlib import Path

SCENES = {
    "store-entrance": [
        ("e1", {"type": "jacket", "color": "red", "materials": "leather", "brand": "acme"}),
        ("e2", {"type": "jacket", "color": "black", "materials": "denim", "brand": "nordic"}),
        ("e3", {"type": "coat", "color": "grey", "materials": "wool", "brand": "summit"}),
        ("e4", {"type": "coat", "color": "brown", "materials": "wool", "brand": "acme"}),
        ("e5", {"type": "hat", "color": "red", "materials": "wool"}),
        ("e6", {"type": "hat", "color": "blue", "materials": "cotton"}),
    ],
    "shirt-wall": [
        ("s1", {"type": "shirt", "color": "white", "pattern": "plain", "sleeve length": "long"}),
        ("s2", {"type": "shirt", "color": "blue", "pattern": "striped", "sleeve length": "short"}),
        ("s3", {"type": "shirt", "color": "green", "pattern": "checked", "sleeve length": "long"}),
        ("s4", {"type": "shirt", "color": "white", "pattern": "floral", "sleeve length": "short"}),
        ("s5", {"type": "sweater", "color": "grey", "pattern": "plain", "materials": "wool"}),
        ("s6", {"type": "sweater", "color": "yellow", "pattern": "striped", "materials": "cotton"}),
    ],
    "trouser-rack": [
        ("t1", {"type": "pants", "color": "grey", "materials": "wool", "size": "m"}),
        ("t2", {"type": "pants", "color": "blue", "materials": "denim", "size": "l"}),
        ("t3", {"type": "pants", "color": "black", "materials": "cotton", "size": "s"}),
        ("t4", {"type": "skirt", "color": "black", "pattern": "plaid", "size": "m"}),
        ("t5", {"type": "skirt", "color": "green", "pattern": "plain", "size": "s"}),
        ("t6", {"type": "pants", "color": "brown", "materials": "linen", "size": "m"}),
    ],
    "dress-corner": [
        ("d1", {"type": "dress", "color": "red", "pattern": "floral", "materials": "silk"}),
        ("d2", {"type": "dress", "color": "black", "pattern": "plain", "materials": "velvet"}),
        ("d3", {"type": "dress", "color": "yellow", "pattern": "dotted", "materials": "cotton"}),
        ("d4", {"type": "dress", "color": "blue", "pattern": "plain", "materials": "linen"}),
        ("d5", {"type": "skirt", "color": "red", "pattern": "dotted", "materials": "silk"}),
    ],
    "sale-table": [
        ("x1", {"type": "shirt", "color": "red", "pattern": "plaid", "brand": "harbor"}),
        ("x2", {"type": "hat", "color": "green", "brand": "meadow"}),
        ("x3", {"type": "jacket", "color": "yellow", "materials": "polyester", "brand": "harbor"}),
        ("x4", {"type": "sweater", "color": "blue", "materials": "wool", "brand": "meadow"}),
    ],
}

NOTES = {
    "store-entrance": "Outerwear rail by the door, hats on a shelf to the left.",
    "shirt-wall": "Shirts folded on the back wall, sweaters stacked below.",
    "trouser-rack": "Two rolling racks of trousers and skirts.",
    "dress-corner": "Dresses on mannequins near the fitting rooms.",
}


def item(scene, iid):
    return dict(SCENES[scene])[iid]


def state(attrs, keys):
    pairs = "; ".join(f"{k}={attrs[k]}" for k in sorted(keys))
    return f"REQUEST:GET | {pairs}"


def describe(attrs, keys):
    order = ["color", "pattern", "materials", "sleeve length", "size", "brand", "type"]
    return " ".join(attrs[k] for k in order if k in keys)


def profile_text(scene):
    words = []
    for _, attrs in SCENES[scene]:
        words.append(" ".join(attrs.values()))
    return f"{scene}: " + ", ".join(words)


def user_turn(text, scene, st=None, targets=(), logits=None):
    t = {"speaker": "user", "text": text, "scene_id": scene}
    if st is not None:
        t["state"] = st
    if targets:
        t["target_item_ids"] = list(targets)
    if logits is not None:
        t["transition_logits"] = logits
    return t


def system_turn(text):
    return {"speaker": "system", "text": text}


def stay(rng):
    return {"z_yes": round(rng.uniform(-3.0, -0.5), 3), "z_no": round(rng.uniform(0.5, 3.0), 3), "target_profile": ""}


def move(rng, target):
    return {
        "z_yes": round(rng.uniform(0.5, 3.0), 3),
        "z_no": round(rng.uniform(-3.0, -0.5), 3),
        "target_profile": profile_text(target),
    }


def dialogue(rng, n, plan):
    """`plan` is a list of (scene, target item, slot keys, annotate) per user turn."""
    turns = []
    previous = plan[0][0]
    for t, (scene, target, keys, annotate) in enumerate(plan):
        attrs = item(scene, target)
        wanted = describe(attrs, keys)
        text = f"I'm looking for something {wanted}." if t == 0 else f"Do you have anything {wanted}?"
        moved = scene != previous
        logits = move(rng, scene) if moved else (stay(rng) if rng.random() < 0.8 else None)
        if moved and rng.random() < 0.2:
            logits = None
        st = state(attrs, keys) if annotate else None
        turns.append(user_turn(text, scene, st, [target], logits))
        reply = f"I recommend {target}, the {describe(attrs, attrs.keys())}."
        if moved:
            reply = f"Let's head over to {scene}. " + reply
        turns.append(system_turn(reply))
        previous = scene
    return {"dialogue_id": f"fx{n:02d}", "initial_scene_id": plan[0][0], "turns": turns}


def main():
    rng = random.Random(11)
    names = sorted(SCENES)
    dialogues = []
    for n in range(20):
        moves = n < 12
        length = 2 + n % 3
        start = names[n % len(names)]
        plan = []
        scene = start
        for t in range(length):
            if moves and t == length - 1:
                scene = names[(names.index(start) + 1 + n % 4) % len(names)]
            iid, attrs = SCENES[scene][(n + t) % len(SCENES[scene])]
            keys = sorted(attrs)[: 1 + (t % 2)]
            plan.append((scene, iid, keys, not (n % 5 == 4 and t == 0)))
        dialogues.append(dialogue(rng, n + 1, plan))

    env = {
        "schema_version": "1",
        "scenes": [
            {
                "scene_id": s,
                "image_ref": f"images/{s}.png",
                **({"spatial_notes": NOTES[s]} if s in NOTES else {}),
                "items": [{"item_id": i, "attributes": a} for i, a in SCENES[s]],
            }
            for s in names
        ],
    }

    user = [t for d in dialogues for t in d["turns"] if t["speaker"] == "user"]
    transition_turns = 0
    transition_dialogues = 0
    referenced = set()
    for d in dialogues:
        prev = d["initial_scene_id"]
        referenced.add(prev)
        moved = False
        for t in d["turns"]:
            if t["speaker"] != "user":
                continue
            referenced.add(t["scene_id"])
            if t["scene_id"] != prev:
                transition_turns += 1
                moved = True
            prev = t["scene_id"]
        transition_dialogues += moved

    def sizes(a, b):
        m = min(transition_dialogues // a, (len(dialogues) - transition_dialogues) // b)
        return [a * m, b * m]

    manifest = {
        "stats": {
            "dialogues": len(dialogues),
            "utterances": sum(len(d["turns"]) for d in dialogues),
            "user_turns": len(user),
            "scenes": len(SCENES),
            "referenced_scenes": len(referenced),
            "items": sum(len(v) for v in SCENES.values()),
            "transition_dialogues": transition_dialogues,
            "non_transition_dialogues": len(dialogues) - transition_dialogues,
            "transition_turns": transition_turns,
            "annotated_states": sum("state" in t for t in user),
            "target_turns": sum(bool(t.get("target_item_ids")) for t in user),
        },
        "split_sizes": {"1:1": sizes(1, 1), "2:1": sizes(2, 1), "1:2": sizes(1, 2), "3:1": sizes(3, 1)},
    }

    out = Path(__file__).resolve().parent.parent / "fixtures" / "corpus"
    out.mkdir(parents=True, exist_ok=True)
    (out / "environment.json").write_text(json.dumps(env, indent=2) + "\n")
    (out / "dialogues.json").write_text(json.dumps({"dialogues": dialogues}, indent=2) + "\n")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(json.dumps(manifest, indent=2))


if __name__ == "__main__":
    main()
