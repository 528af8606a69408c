# Copyright (c) 2026 The kgirnet Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Regenerates the embedding and relation-linking fixtures.

embeddings.txt      50-d vectors for every token of kg.tsv and corpus.jsonl.
                    Each vector carries a shared positive component, so all
                    cosines are positive; words in one semantic group share a
                    group direction.
linking/            synthetic relation-linking set: kg.tsv, embeddings.txt and
                    questions.tsv (200 rows of query, entity, gold relation).

Usage: python3 gen_fixtures.py   (run from this directory)
"""

import json
import os

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))

GROUPS = {
    "direct": ["director", "directed", "directs", "directing", "directed_by", "by"],
    "rate": ["rating", "rated", "rate", "score", "7.8", "7.9"],
    "release": ["release", "released", "release_year", "year", "2009", "1997"],
    "genre": ["genre", "science", "fiction", "kind"],
    "birth": ["birth", "born", "birth_place", "place", "kapuskasing"],
    "time": ["time", "11am", "10am", "when", "date"],
    "day": ["monday", "tuesday", "wednesday", "thursday", "friday", "today", "tomorrow"],
    "weather": ["weather", "forecast", "warm", "windy", "hot", "40f", "60f"],
    "address": ["address", "located", "live", "ave", "alester", "van", "ness", "200", "580"],
    "distance": ["distance", "far", "miles", "away", "3"],
    "poi": ["poi", "type", "gas", "station", "friends", "house"],
    "coach": ["coach", "coaches", "coaching"],
    "stadium": ["stadium", "home", "plays", "signal", "iduna", "park"],
    "captain": ["captain"],
    "cup": ["world", "cup", "win", "won", "2006"],
    "nation": ["nationality", "from", "switzerland"],
    "party": ["party", "with", "boss", "doctor"],
    # Frequent function words: short vectors near the centroid.
    "function": ["who", "is", "the", "of", "and", "how", "was", "it", "what", "a", "in", "on", "at",
                 "to", "for", "do", "does", "did", "s", "me", "my", "you", "your", "are", "be", "will",
                 "give", "want", "have", "last", "currently", "where", "about"],
}


def tokens_of(label):
    return [t for t in label.split("_") if t]


def write_table(path, table, dim):
    with open(path, "w") as f:
        f.write(f"{len(table)} {dim}\n")
        for word in sorted(table):
            f.write(word + " " + " ".join(f"{x:.6f}" for x in table[word]) + "\n")


def main_embeddings(rng, dim=50):
    words = set()
    with open(os.path.join(HERE, "kg.tsv")) as f:
        for line in f:
            if line.startswith("#") or not line.strip():
                continue
            for label in line.rstrip("\n").split("\t"):
                words.add(label)
                words.update(tokens_of(label))
    with open(os.path.join(HERE, "corpus.jsonl")) as f:
        for line in f:
            for turn in json.loads(line)["turns"]:
                words.update(turn["text"].lower().split())
    for members in GROUPS.values():
        words.update(members)

    shared = np.abs(rng.normal(size=dim))
    shared /= np.linalg.norm(shared)
    group_dir = {g: rng.normal(size=dim) for g in GROUPS}
    group_of = {w: g for g, members in GROUPS.items() for w in members}
    table = {}
    for w in sorted(words):
        own = rng.normal(size=dim) * 0.35
        if group_of.get(w) == "function":
            table[w] = 0.15 * (shared + 0.25 * own)
            continue
        v = own + (group_dir[group_of[w]] if w in group_of else rng.normal(size=dim))
        v = v / np.linalg.norm(v)
        table[w] = 0.6 * shared + v
    write_table(os.path.join(HERE, "embeddings.txt"), table, dim)


def linking_set(rng, dim=32, relations=12, subjects=40, objects_per_relation=6, questions=200):
    out = os.path.join(HERE, "linking")
    os.makedirs(out, exist_ok=True)
    # Relations come in confusable pairs: both labels lean on one pair
    # direction. Objects of a relation share a type direction; question cue
    # words mix label and type directions with noise.
    pair_dir = [rng.normal(size=dim) for _ in range(relations // 2)]
    type_dir = [rng.normal(size=dim) for _ in range(relations)]
    unit = lambda v: v / np.linalg.norm(v)
    table = {}
    rel_label = [f"rel{r}" for r in range(relations)]
    for r in range(relations):
        table[rel_label[r]] = unit(pair_dir[r // 2] + 0.45 * rng.normal(size=dim))
    objs = [[f"obj{r}x{j}" for j in range(objects_per_relation)] for r in range(relations)]
    for r in range(relations):
        for o in objs[r]:
            table[o] = unit(type_dir[r] + 0.4 * rng.normal(size=dim))
    cues = [[f"cue{r}x{m}" for m in range(3)] for r in range(relations)]
    for r in range(relations):
        for c in cues[r]:
            table[c] = unit(table[rel_label[r]] + 1.0 * unit(type_dir[r]) + 0.9 * unit(rng.normal(size=dim)))
    for w in ["which", "does", "have", "what", "is", "the", "of"]:
        table[w] = unit(rng.normal(size=dim))
    ents = [f"ent{i}" for i in range(subjects)]
    for e in ents:
        table[e] = unit(rng.normal(size=dim))

    triples = []
    facts = {}
    for i, e in enumerate(ents):
        pairs = rng.choice(relations // 2, size=2, replace=False)
        rels = sorted({int(2 * p) for p in pairs} | {int(2 * p + 1) for p in pairs})
        facts[e] = rels
        for r in rels:
            triples.append((e, rel_label[r], objs[r][int(rng.integers(objects_per_relation))]))
    with open(os.path.join(out, "kg.tsv"), "w") as f:
        for t in triples:
            f.write("\t".join(t) + "\n")
    write_table(os.path.join(out, "embeddings.txt"), table, dim)
    templates = ["which {c} does {e} have", "what is the {c} of {e}"]
    with open(os.path.join(out, "questions.tsv"), "w") as f:
        for q in range(questions):
            e = ents[int(rng.integers(subjects))]
            r = facts[e][int(rng.integers(len(facts[e])))]
            c = cues[r][int(rng.integers(3))]
            text = templates[q % 2].format(c=c, e=e)
            f.write(f"{text}\t{e}\t{rel_label[r]}\n")


if __name__ == "__main__":
    rng = np.random.default_rng(20260101)
    main_embeddings(rng)
    linking_set(np.random.default_rng(20260102))
