#!/usr/bin/env python3
"""Regenerates the fixture databases and the corpus-goal facsimile under data/.

The output is deterministic for a given --seed. Records are shaped like the
MultiWOZ restaurant/hotel/train tables but every value is synthetic.
"""
import argparse
import json
import random
from pathlib import Path

AREAS = ["centre", "north", "east", "west", "south"]
PRICES = ["cheap", "moderate", "expensive"]
DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
FOODS = ["chinese", "italian", "indian", "british", "european", "thai", "french",
         "japanese", "korean", "turkish", "mexican", "spanish", "vietnamese",
         "seafood", "gastropub", "lebanese", "mediterranean", "portuguese"]
STREETS = ["regent street", "king street", "hills road", "mill road", "bridge street",
           "trumpington street", "newmarket road", "chesterton road", "castle street",
           "lensfield road", "jesus lane", "market hill", "sidney street", "histon road"]

RESTAURANT_FIRST = ["golden", "silver", "royal", "little", "jade", "red", "blue", "old",
                    "copper", "velvet", "lucky", "saffron", "olive", "maple", "amber"]
RESTAURANT_SECOND = ["lantern", "kettle", "garden", "spoon", "orchid", "harbour", "table",
                     "terrace", "pagoda", "bistro", "kitchen", "cellar", "courtyard"]
HOTEL_FIRST = ["acorn", "alpha", "ashley", "autumn", "bridge", "carlton", "city", "cherry",
               "finch", "gonville", "hamilton", "harbour", "kirkwood", "lovell", "meadow",
               "orchard", "park", "rosa", "river", "willow", "warkworth", "archway"]
HOTEL_SECOND = {"hotel": ["hotel", "lodge hotel", "house hotel"],
                "guesthouse": ["guest house", "guesthouse", "bed and breakfast"]}
STATIONS = ["london kings cross", "london liverpool street", "stansted airport",
            "peterborough", "norwich", "ely", "bishops stortford", "leicester",
            "birmingham new street", "broxbourne"]


def unique_names(rng, build, count):
    names = []
    seen = set()
    while len(names) < count:
        name = build(rng)
        if name in seen:
            continue
        # Inform detection matches names as substrings, so no name may contain another.
        if any(name in other or other in name for other in names):
            continue
        seen.add(name)
        names.append(name)
    return names


def phone(rng):
    return "01223 " + "".join(str(rng.randrange(10)) for _ in range(6))


def postcode(rng):
    return f"cb{rng.randrange(1, 5)} {rng.randrange(1, 10)}{rng.choice('abdefghjlnpqrstuwxyz')}{rng.choice('abdefghjlnpqrstuwxyz')}"


def address(rng):
    return f"{rng.randrange(1, 120)} {rng.choice(STREETS)}"


def make_restaurants(rng, count):
    names = unique_names(rng, lambda r: f"the {r.choice(RESTAURANT_FIRST)} {r.choice(RESTAURANT_SECOND)}", count)
    rows = []
    for i, name in enumerate(names):
        # Keep enough cheap centre restaurants that the five-record cap is exercised.
        area = "centre" if i % 4 == 0 else rng.choice(AREAS)
        price = "cheap" if i % 8 == 0 else rng.choice(PRICES)
        rows.append({"name": name, "area": area, "pricerange": price,
                     "food": rng.choice(FOODS), "phone": phone(rng),
                     "postcode": postcode(rng), "address": address(rng)})
    return rows


def make_hotels(rng, count):
    rows = []
    kinds = []

    def build(r):
        kind = r.choice(["hotel", "guesthouse"])
        kinds.append(kind)
        return f"{r.choice(HOTEL_FIRST)} {r.choice(HOTEL_SECOND[kind])}"

    names = unique_names(rng, build, count)
    for name in names:
        kind = "hotel" if "hotel" in name else "guesthouse"
        rows.append({"name": name, "area": rng.choice(AREAS), "pricerange": rng.choice(PRICES),
                     "type": kind, "internet": rng.choice(["yes", "yes", "no"]),
                     "parking": rng.choice(["yes", "no"]), "stars": str(rng.randrange(1, 6)),
                     "phone": phone(rng), "postcode": postcode(rng), "address": address(rng)})
    return rows


def hhmm(minutes):
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def make_trains(rng, per_route_day):
    rows = []
    used_ids = set()
    for station in STATIONS:
        duration = rng.choice([17, 28, 38, 50, 51, 79, 88, 105, 163])
        price = rng.choice([4.4, 8.08, 10.1, 13.2, 17.6, 18.88, 23.6, 37.8])
        for day in DAYS:
            for departure, destination in (("cambridge", station), (station, "cambridge")):
                starts = sorted(rng.sample(range(5 * 60, 22 * 60, 15), per_route_day))
                for start in starts:
                    arrive = start + duration
                    if arrive >= 24 * 60:
                        continue
                    while True:
                        trainid = f"TR{rng.randrange(1000, 10000)}"
                        if trainid not in used_ids:
                            used_ids.add(trainid)
                            break
                    rows.append({"trainid": trainid, "departure": departure,
                                 "destination": destination, "day": day,
                                 "leaveat": hhmm(start), "arriveby": hhmm(arrive),
                                 "price": f"{price:.2f} pounds", "duration": f"{duration} minutes"})
    return rows


def emphasis(text):
    return f"<span class='emphasis'>{text}</span>"


def restaurant_spec(rng, rows):
    row = rng.choice(rows)
    slots = rng.sample(["area", "pricerange", "food"], rng.randrange(2, 4))
    informables = {s: row[s] for s in sorted(slots)}
    booking = {"people": str(rng.randrange(1, 9)), "day": rng.choice(DAYS),
               "time": hhmm(rng.randrange(11 * 4, 21 * 4) * 15)}
    parts = ["You are looking for a " + emphasis("restaurant") + "."]
    if "food" in informables:
        parts.append(f"The restaurant should serve {emphasis(informables['food'])} food.")
    if "area" in informables:
        parts.append(f"The restaurant should be in the {emphasis(informables['area'])}.")
    if "pricerange" in informables:
        parts.append(f"The restaurant should be in the {emphasis(informables['pricerange'])} price range.")
    parts.append(f"Once you find a restaurant, make sure you get the reference number. Book a table for "
                 f"{emphasis(booking['people'])} people at {emphasis(booking['time'])} on "
                 f"{emphasis(booking['day'])}.")
    return {"domain": "restaurant", "informables": informables, "booking": booking}, " ".join(parts)


def hotel_spec(rng, rows):
    row = rng.choice(rows)
    slots = rng.sample(["area", "pricerange", "type", "stars", "internet", "parking"], rng.randrange(2, 5))
    informables = {s: row[s] for s in sorted(slots)}
    booking = {"people": str(rng.randrange(1, 9)), "day": rng.choice(DAYS),
               "stay": str(rng.randrange(1, 6))}
    kind = informables.get("type", "place to stay")
    parts = [f"You are looking for a {emphasis(kind)}."]
    for slot in ("area", "pricerange", "stars", "internet", "parking"):
        if slot not in informables:
            continue
        value = emphasis(informables[slot])
        parts.append({
            "area": f"It should be in the {value}.",
            "pricerange": f"It should be in the {value} price range.",
            "stars": f"It should have a star rating of {value}.",
            "internet": f"Free wifi: {value}.",
            "parking": f"Free parking: {value}.",
        }[slot])
    parts.append(f"Once you find the hotel, make sure you get the reference number. Book it for "
                 f"{emphasis(booking['people'])} people and {emphasis(booking['stay'])} nights "
                 f"starting from {emphasis(booking['day'])}.")
    return {"domain": "hotel", "informables": informables, "booking": booking}, " ".join(parts)


def train_spec(rng, rows):
    row = rng.choice(rows)
    informables = {"departure": row["departure"], "destination": row["destination"], "day": row["day"]}
    hours, minutes = map(int, row["leaveat"].split(":"))
    if rng.random() < 0.5:
        informables["leaveat"] = hhmm(max(0, hours * 60 + minutes - rng.choice([0, 15, 30])))
        timing = f"The train should leave after {emphasis(informables['leaveat'])}."
    else:
        hours, minutes = map(int, row["arriveby"].split(":"))
        informables["arriveby"] = hhmm(min(23 * 60 + 45, hours * 60 + minutes + rng.choice([0, 15, 30])))
        timing = f"The train should arrive by {emphasis(informables['arriveby'])}."
    booking = {"people": str(rng.randrange(1, 9))}
    parts = [f"You are also looking for a {emphasis('train')}.",
             f"The train should depart from {emphasis(informables['departure'])} and should go to "
             f"{emphasis(informables['destination'])}.",
             f"The train should leave on {emphasis(informables['day'])}.", timing,
             f"Once you find the train you want to make a booking for {emphasis(booking['people'])} people. "
             f"Make sure you get the reference number."]
    return {"domain": "train", "informables": informables, "booking": booking}, " ".join(parts)


def make_corpus_goals(rng, db, n_single, n_multi):
    makers = {"restaurant": restaurant_spec, "hotel": hotel_spec, "train": train_spec}
    combos = [("restaurant", "hotel"), ("hotel", "train"), ("train", "restaurant")]
    goals = []
    seen = set()

    def add(domains, prefix, index):
        while True:
            specs, texts = [], []
            for domain in domains:
                spec, text = makers[domain](rng, db[domain])
                specs.append(spec)
                texts.append(text)
            key = json.dumps(specs, sort_keys=True)
            if key not in seen:
                seen.add(key)
                break
        goals.append({"id": f"{prefix}{index:04d}", "domains": specs, "text": " ".join(texts),
                      "provenance": "corpus"})

    singles = ["restaurant", "hotel", "train"]
    for i in range(n_single):
        add((singles[i % 3],), "sng", i + 1)
    for i in range(n_multi):
        add(combos[i % 3], "mul", i + 1)
    return goals


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as out:
        for row in rows:
            out.write(json.dumps(row, ensure_ascii=False) + "\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(Path(__file__).resolve().parents[2] / "data"))
    parser.add_argument("--seed", type=int, default=2025)
    args = parser.parse_args()
    out = Path(args.out)
    rng = random.Random(args.seed)

    db = {"restaurant": make_restaurants(rng, 60),
          "hotel": make_hotels(rng, 55),
          "train": make_trains(rng, 2)}
    for domain, rows in db.items():
        write_jsonl(out / "db" / f"{domain}.jsonl", rows)
    write_jsonl(out / "goals" / "corpus.jsonl", make_corpus_goals(rng, db, 60, 57))
    for domain, rows in db.items():
        print(f"{domain}: {len(rows)} records")


if __name__ == "__main__":
    main()
