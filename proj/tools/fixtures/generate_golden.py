#!/usr/bin/env python3
"""Writes data/examples/golden: three corpus goals with scripted players that
solve them under every architecture."""
import json
from pathlib import Path

DATA = Path(__file__).resolve().parents[2] / "data"
OUT = DATA / "examples" / "golden"

RETRIEVAL = {
    "restaurant": ["area", "pricerange", "food", "name"],
    "hotel": ["area", "pricerange", "type", "name", "internet", "parking", "stars"],
    "train": ["destination", "departure", "day", "arriveby", "leaveat"],
}
BOOKING = {
    "restaurant": ["food", "area", "pricerange", "name", "people", "day", "time"],
    "hotel": ["area", "pricerange", "type", "internet", "parking", "name", "stars",
              "people", "day", "stay"],
    "train": ["destination", "departure", "day", "arriveby", "leaveat", "people", "trainid"],
}
IDENTITY = {"restaurant": "name", "hotel": "name", "train": "trainid"}


def load_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def satisfies(record, informables):
    for slot, wanted in informables.items():
        have = record.get(slot)
        if have is None:
            return False
        if slot == "leaveat" and have < wanted:
            return False
        if slot == "arriveby" and have > wanted:
            return False
        if slot not in ("leaveat", "arriveby") and have.lower() != wanted.lower():
            return False
    return True


def call(name, arguments):
    return json.dumps({"name": name, "arguments": arguments})


def retrieval_args(domain, informables):
    args = {}
    for slot in RETRIEVAL[domain]:
        if slot not in informables:
            continue
        value = informables[slot]
        if slot == "leaveat":
            args[slot] = {"operator": ">=", "value": value}
        elif slot == "arriveby":
            args[slot] = {"operator": "<=", "value": value}
        elif slot == "stars":
            args[slot] = {"operator": "=", "value": value}
        else:
            args[slot] = value
    return args


def booking_args(domain, record, booking):
    merged = dict(record)
    merged.update(booking)
    return {slot: merged[slot] for slot in BOOKING[domain]}


def describe(informables):
    return ", ".join(f"{k} {v}" for k, v in informables.items())


def build(goal, record):
    spec = goal["domains"][0]
    domain, informables, booking = spec["domain"], spec["informables"], spec["booking"]
    ident = record[IDENTITY[domain]]
    found = f"I found {ident} for you. Shall I book it?"
    booked = f"Your booking at {ident} is confirmed. The reference number is {{{{refnum}}}}."
    retrieve = call(f"retrievefrom{domain}db", retrieval_args(domain, informables))
    validate = call(f"validate{domain}booking", booking_args(domain, record, booking))

    user = [
        f"Hi, I need a {domain} with {describe(informables)}.",
        f"Yes please, book {ident} with {describe(booking)}.",
        "DONE",
    ]
    intents = [call("detectintent", {"intent": "dbretrieval-request", "domain": domain}),
               call("detectintent", {"intent": "booking-request", "domain": domain})]
    second_slots = {IDENTITY[domain]: ident, **booking}
    if domain == "train":
        second_slots.update({"leaveat": record["leaveat"], "arriveby": record["arriveby"]})
    slots = [call("extractslots", {"domain": domain, **informables}),
             call("extractslots", {"domain": domain, **second_slots})]
    responses = [call("followup", {"message": found}), call("followup", {"message": booked})]

    def sub(name, data=None):
        args = {"subsystem": name}
        if data is not None:
            args["input_data"] = data
        return call("processnextsubsystem", args)

    manager = [
        sub("intent_detection"), sub("slot_extraction"), retrieve,
        sub("response_generation", f"Found {ident}."), call("followup", {"message": found}),
        sub("intent_detection"), sub("slot_extraction"), validate,
        sub("response_generation", "Booking confirmed with reference {{refnum}}."),
        call("followup", {"message": booked}),
    ]
    system = {
        "monolithic": {"monolithic": [retrieve, call("followup", {"message": found}),
                                      validate, call("followup", {"message": booked})]},
        "intent": intents,
        "slots": slots,
        "response": responses,
        "modular_llm": {"manager": manager},
    }
    return user, system


def main():
    corpus = load_jsonl(DATA / "goals" / "corpus.jsonl")
    db = {d: load_jsonl(DATA / "db" / f"{d}.jsonl") for d in ("restaurant", "hotel", "train")}
    chosen = {}
    for goal in corpus:
        if len(goal["domains"]) != 1:
            continue
        spec = goal["domains"][0]
        domain = spec["domain"]
        if domain in chosen:
            continue
        matches = [r for r in db[domain] if satisfies(r, spec["informables"])]
        if matches:
            chosen[domain] = (goal, matches[0])
    OUT.mkdir(parents=True, exist_ok=True)
    goals, users, systems = [], {}, {}
    for domain in ("restaurant", "hotel", "train"):
        goal, record = chosen[domain]
        goals.append(goal)
        users[goal["id"]], systems[goal["id"]] = build(goal, record)
    with open(OUT / "goals.jsonl", "w") as f:
        for goal in goals:
            f.write(json.dumps(goal) + "\n")
    (OUT / "user_scripts.json").write_text(json.dumps(users, indent=2) + "\n")
    (OUT / "system_scripts.json").write_text(json.dumps(systems, indent=2) + "\n")
    config = {
        "name": "golden",
        "goals": "goals.jsonl",
        "stores": {d: f"../../db/{d}.jsonl" for d in ("restaurant", "hotel", "train")},
        "prompts_dir": "../../prompts",
        "prices": "../../prices/prices.json",
        "output_dir": "runs/golden",
        "user_simulators": [{"id": "scripted-user", "backend": "scripted",
                             "scripts": "user_scripts.json"}],
        "dialogue_systems": [{"id": "scripted-system", "backend": "scripted",
                              "scripts": "system_scripts.json"}],
        "architectures": ["monolithic", "modular_prog", "modular_llm"],
        "seeds": [0],
        "concurrency": 4,
        "clock": "virtual",
    }
    (OUT / "config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
