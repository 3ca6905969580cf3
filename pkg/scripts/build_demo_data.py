"""Regenerate the bundled demo data under src/qdecomp/data/.

The demo world is fictional. Running this script is deterministic; the
committed files are its output.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "qdecomp" / "data"
rng = np.random.default_rng(2018)

ACTORS = ["Mira Castell", "Jonah Reyes", "Talia Brandt", "Oskar Lindqvist",
          "Priya Venn", "Declan Shaw", "Ines Moreau", "Felix Hartmann"]
DIRECTORS = ["Ava Kessler", "Marco Bellini", "Ruth Okafor", "Lena Sato", "Viktor Hale", "Nadia Roux"]
DESIGNERS = ["Elsa Quint", "Tomas Varga", "Greta Holm", "Iris Delacroix", "Paul Renner"]
AUTHORS = ["Hugo Brennan", "Clara Wexley", "Dmitri Alvaro", "Nora Whitcombe", "Ezra Kwan", "Lucia Ferrante"]
PARTNERS = ["Simon Arkwright", "Helena Voss", "Rafael Ortiz", "Maya Lindholm", "Gideon Price",
            "Sofia Marchetti", "Adrian Cole", "Yara Nassar", "Bruno Keller", "Elin Strand",
            "Omar Haddad", "Camille Dufresne", "Tobias Wren", "Anika Roth", "Julian Pike",
            "Freya Olsen", "Matteo Russo", "Leah Goldberg", "Victor Lund", "Zara Quill"]
GENRES = ["Drama", "Comedy", "Thriller", "Western"]
BOOK_GENRES = ["Mystery", "Romance", "History"]
FILMS = ["The Glass Harbor", "Northern Lights Fall", "Copper Sky", "The Quiet Orchard",
         "Midnight Ferry", "Salt and Iron", "The Last Cartographer", "Paper Lanterns",
         "River of Names", "The Winter Ledger", "Blue Meridian", "Hollow Crown Road",
         "The Amber Signal", "Distant Bells", "Silver Tide", "The Clockmaker",
         "Ash Valley", "Velvet Storm", "The Long Crossing", "Harbor of Echoes",
         "Stone Garden", "The Ninth Bridge", "Lantern Street", "Wild Meadow"]
BOOKS = ["Without Harbor", "The Iron Psalm", "Night Orchard", "A Map of Salt", "The Tin Crown",
         "Ember Road", "The Pale Archive", "Seven Winters", "The Hollow Clock", "Glass Saints",
         "The Far Meridian", "Copper Letters", "The Silent Ferry", "Quiet Rivers", "The Amber Room",
         "Long Night Falls", "The Wren Papers", "Ashes of Corvia"]
COUNTRIES = ["Arland", "Belmora", "Corvia", "Dunmere", "Estovia", "Felrand"]
CURRENCIES = ["Arlish mark", "Belmoran lira", "Corvian crown", "Dunmere pound", "Estovian thaler", "Felrish dollar"]
LANGUAGES = ["Arlish", "Arlish", "Corvian", "Corvian", "Estovian", "Estovian"]
CITIES = {"Arland": ["Port Arla", "Kessbridge"], "Belmora": ["Belcastro", "Monteleva"],
          "Corvia": ["Corvasz", "Dravnik"], "Dunmere": ["Dunholt", "Marrowby"],
          "Estovia": ["Estrava", "Velsk"], "Felrand": ["Felhaven", "Ostmark"]}
BORDERS = [("Arland", "Belmora"), ("Arland", "Corvia"), ("Arland", "Dunmere"), ("Belmora", "Corvia"),
           ("Belmora", "Estovia"), ("Corvia", "Dunmere"), ("Corvia", "Felrand"), ("Dunmere", "Felrand"),
           ("Estovia", "Felrand"), ("Belmora", "Felrand")]
SCHOOLS = ["Westbrook Academy", "Harlow College", "St Brendan School", "Ridgemont Institute",
           "Calder University", "Linden Conservatory", "Marlow High School", "Ashford College"]
RIVERS = [("Vell River", "Morrow Pot", "Port Arla"), ("Asker River", "Lake Tarn", "Belcastro"),
          ("Dorn River", "Grey Fell", "Dravnik"), ("Sable River", "Hob Spring", "Estrava"),
          ("Imber River", "Cold Tarn", "Felhaven")]
AWARD_NAMES = ["Harrow Prize", "Golden Quill", "Meridian Medal", "Silver Lantern", "Corvin Award",
               "Estrava Laurel", "Bellwether Cup", "Orchard Star", "Tarn Ribbon", "Ferry Cross",
               "Ledger Shield", "Amber Crest", "Crown Rosette", "Lantern Trophy", "Signal Plate",
               "Wren Medal", "Meadow Cup", "Iron Laurel", "Tide Star", "Saltmark Prize"]


def eid(name: str) -> str:
    return name.replace(" ", "_")


triples: list[tuple[str, str, str]] = []


def add(s: str, p: str, o) -> None:
    if isinstance(o, (int, float)):
        o = str(o)
    triples.append((s, p, o))


people = ACTORS + DIRECTORS + AUTHORS
cities = [c for cs in CITIES.values() for c in cs]

# films
runtimes = rng.choice(np.arange(84, 160), size=len(FILMS), replace=False)
years = rng.choice(np.arange(1990, 2021), size=len(FILMS), replace=False)
cast = []
for k, film in enumerate(FILMS):
    f = eid(film)
    add(f, "film.directed_by", eid(DIRECTORS[k % len(DIRECTORS)]))
    add(f, "film.costume_designer", eid(DESIGNERS[int(rng.integers(len(DESIGNERS)))]))
    add(f, "film.genre", eid(GENRES[int(rng.integers(len(GENRES)))]))
    add(f, "film.runtime", int(runtimes[k]))
    add(f, "film.release_year", int(years[k]))
    actors = rng.choice(len(ACTORS), size=3, replace=False)
    for n, a in enumerate(sorted(actors)):
        perf = f"perf_{k}_{n}#cvt"
        add(f, "film.starring", perf)
        add(perf, "performance.actor", eid(ACTORS[a]))
        cast.append((film, ACTORS[a]))

# people
for k, person in enumerate(people):
    p = eid(person)
    add(p, "people.place_of_birth", eid(cities[int(rng.integers(len(cities)))]))
    add(p, "people.spouse", eid(PARTNERS[k]))
    add(eid(PARTNERS[k]), "people.spouse", p)
    add(p, "award.won", eid(AWARD_NAMES[k]))
    for s in sorted(rng.choice(len(SCHOOLS), size=int(rng.integers(2, 4)), replace=False)):
        add(p, "people.education", eid(SCHOOLS[s]))

# books
pages = rng.choice(np.arange(180, 720), size=len(BOOKS), replace=False)
for k, book in enumerate(BOOKS):
    author = AUTHORS[k % len(AUTHORS)]
    add(eid(author), "book.works_written", eid(book))
    add(eid(book), "book.genre", eid(BOOK_GENRES[int(rng.integers(len(BOOK_GENRES)))]))
    add(eid(book), "book.pages", int(pages[k]))

# geography
armies = rng.choice(np.arange(800, 60000, 50), size=len(COUNTRIES), replace=False)
pops = rng.choice(np.arange(1_000_000, 90_000_000, 10_000), size=len(COUNTRIES), replace=False)
for k, country in enumerate(COUNTRIES):
    c = eid(country)
    add(c, "country.capital", eid(CITIES[country][0]))
    add(c, "country.currency", eid(CURRENCIES[k]))
    add(c, "country.official_language", eid(LANGUAGES[k]))
    add(c, "country.army_size", int(armies[k]))
    add(c, "country.population", int(pops[k]))
    for city in CITIES[country]:
        add(eid(city), "location.contained_by", c)
        add(eid(city), "city.population", int(rng.integers(20, 3000)) * 1000)
        add(eid(city), "city.founded", int(rng.integers(900, 1900)))
for a, b in BORDERS:
    add(eid(a), "location.borders", eid(b))
    add(eid(b), "location.borders", eid(a))

founded = rng.choice(np.arange(1600, 1990), size=len(SCHOOLS), replace=False)
for k, school in enumerate(SCHOOLS):
    add(eid(school), "school.located_in", eid(cities[int(rng.integers(len(cities)))]))
    add(eid(school), "school.founded", int(founded[k]))

for river, origin, mouth in RIVERS:
    add(eid(river), "river.origin", eid(origin))
    add(eid(river), "river.mouth", eid(mouth))
    add(eid(river), "river.length", int(rng.integers(40, 900)))

OUT.mkdir(parents=True, exist_ok=True)
with open(OUT / "demo_kb.tsv", "w") as fh:
    fh.write("# demo knowledge base (fictional); subj<TAB>pred<TAB>obj, #cvt marks event nodes\n")
    for s, p, o in triples:
        fh.write(f"{s}\t{p}\t{o}\n")

TEMPLATES = [
    ("film.directed_by", "the film directed by OBJ", "conj:and is"),
    ("film.costume_designer", "the film with costume designs by OBJ", "conj:and is"),
    ("film.genre", "a OBJ film", "conj:and is"),
    ("film.starring+performance.actor", "the film that featured OBJ", "conj:and is"),
    ("people.education", "the person who attended OBJ", "conj:and is"),
    ("school.located_in", "the school located in OBJ", "conj:and is"),
    ("location.borders", "the country that borders OBJ", "conj:and is"),
    ("country.official_language", "the country that speaks OBJ", "conj:and is"),
    ("book.genre", "a OBJ book", "conj:and is"),
    ("film.runtime", "has the OBJ runtime", "super:and"),
    ("film.release_year", "has the OBJ release year", "super:and"),
    ("school.founded", "has the OBJ founding year", "super:and"),
    ("country.army_size", "has the OBJ army size", "super:and"),
    ("country.population", "has the OBJ population", "super:and"),
    ("city.population", "has the OBJ population", "super:and"),
    ("book.pages", "has the OBJ page count", "super:and"),
    ("film.runtime", "has a runtime of OBJ minutes", "compar:and"),
    ("film.release_year", "was released in a year OBJ", "compar:and"),
    ("school.founded", "was founded in a year OBJ", "compar:and"),
    ("country.army_size", "has an army size of OBJ", "compar:and"),
    ("country.population", "has a population of OBJ", "compar:and"),
    ("city.population", "has a population of OBJ", "compar:and"),
    ("book.pages", "has a page count of OBJ", "compar:and"),
    ("people.spouse", "the person married to OBJ", "comp:"),
    ("award.won", "the winner of OBJ", "comp:"),
    ("book.works_written", "the author who wrote OBJ", "comp:"),
    ("country.capital", "the country whose capital is OBJ", "comp:"),
    ("country.currency", "the country that uses the OBJ", "comp:"),
    ("river.origin", "the river that originates in OBJ", "comp:"),
    ("country.official_language", "the country that speaks OBJ", "comp:"),
]
with open(OUT / "templates.tsv", "w") as fh:
    fh.write("# predicate<TAB>template with OBJ<TAB>comp-type:glue\n")
    for row in TEMPLATES:
        fh.write("\t".join(row) + "\n")

seeds = []


def seed(question: str, where: list, entity: str, mention: str | None = None) -> None:
    name = mention or entity
    start = question.index(name)
    seeds.append({
        "question": question,
        "query": {"select": "?x", "where": where, "order": None, "filter": None},
        "mentions": {eid(entity): [start, start + len(name)]},
    })


for a in ACTORS:
    seed(f"what movies did {a} star in", [["?x", "film.starring", "?c"], ["?c", "performance.actor", eid(a)]], a)
for p in people:
    seed(f"what schools did {p} attend", [[eid(p), "people.education", "?x"]], p)
    seed(f"where was {p} born", [[eid(p), "people.place_of_birth", "?x"]], p)
for d in DIRECTORS:
    seed(f"what films did {d} direct", [["?x", "film.directed_by", eid(d)]], d)
for au in AUTHORS:
    seed(f"what books did {au} write", [[eid(au), "book.works_written", "?x"]], au)
for c in COUNTRIES:
    seed(f"what countries border {c}", [[eid(c), "location.borders", "?x"]], c)
    seed(f"what cities are in {c}", [["?x", "location.contained_by", eid(c)]], c)
for river, _, _ in RIVERS:
    seed(f"where does the {river} end", [[eid(river), "river.mouth", "?x"]], river, f"the {river}")

with open(OUT / "demo_seeds.jsonl", "w") as fh:
    for s in seeds:
        fh.write(json.dumps(s) + "\n")

SYNONYMS = [
    ("movies", "films"), ("movie", "film"), ("star", "appear"), ("countries", "nations"),
    ("country", "nation"), ("border", "neighbor"), ("borders", "neighbors"), ("person", "individual"),
    ("married", "wed"), ("winner", "recipient"), ("author", "writer"), ("wrote", "penned"),
    ("directed", "helmed"), ("direct", "helm"), ("designs", "outfits"), ("costume", "wardrobe"),
    ("largest", "biggest"), ("smallest", "tiniest"), ("runtime", "duration"), ("population", "populace"),
    ("founding", "establishment"), ("located", "situated"), ("originates", "begins"), ("river", "stream"),
    ("end", "terminate"), ("cities", "towns"), ("city", "town"), ("books", "novels"), ("book", "novel"),
    ("speaks", "uses"), ("featured", "showcased"), ("less", "fewer"), ("more", "greater"), ("capital", "seat"),
    ("attended", "studied"), ("attend", "study"), ("schools", "academies"), ("school", "academy"),
    ("born", "raised"), ("released", "issued"), ("year", "date"), ("army", "military"),
    ("count", "total"), ("uses", "employs"), ("film", "picture"),
]
with open(OUT / "synonyms.tsv", "w") as fh:
    fh.write("# word<TAB>substitute\n")
    for a, b in SYNONYMS:
        fh.write(f"{a}\t{b}\n")

# embeddings: random directions, synonym pairs pulled close; proper-name
# tokens are left out so that the model has to learn their vectors
name_tokens = set()
for name in ACTORS + DIRECTORS + DESIGNERS + AUTHORS + PARTNERS + FILMS + BOOKS + COUNTRIES \
        + CURRENCIES + LANGUAGES + cities + SCHOOLS + AWARD_NAMES + [r for rr in RIVERS for r in rr]:
    name_tokens.update(w.lower() for w in name.split())
vocab: list[str] = []
# words used outside proper names always get a vector
common = {"the", "of", "and", "a"} | {w.lower() for pair in SYNONYMS for w in pair}
for t in TEMPLATES:
    common |= {w.lower() for w in re.findall(r"[A-Za-z]+", t[1] + " " + t[2].split(":", 1)[1]) if w != "OBJ"}
texts = [s["question"] for s in seeds] + [t[1] for t in TEMPLATES] + [t[2].split(":", 1)[1] for t in TEMPLATES]
texts += [w for pair in SYNONYMS for w in pair]
texts += ["largest smallest less than more minutes what which who where when during is the of and a"]
for text in texts:
    for w in re.findall(r"[A-Za-z]+", text):
        w = w.lower()
        if w not in vocab and (w not in name_tokens or w in common):
            vocab.append(w)
dim = 50
vectors = {w: rng.normal(size=dim) for w in vocab}
for a, b in SYNONYMS:
    a, b = a.lower(), b.lower()
    vectors[b] = 0.8 * vectors[a] + 0.6 * rng.normal(size=dim)
with open(OUT / "demo_embeddings.txt", "w") as fh:
    for w in vocab:
        fh.write(w + " " + " ".join(f"{x:.5f}" for x in vectors[w]) + "\n")

print(f"{len(triples)} triples, {len(seeds)} seeds, {len(TEMPLATES)} templates, {len(vocab)} embedded tokens")
