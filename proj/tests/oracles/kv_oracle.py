"""Independent SplitMix64 + key-value example generator; writes the frozen golden JSONL."""
import json
import sys

MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)


def gen_kv(n_pairs, seed):
    rng = SplitMix64(seed)
    seen = set()

    def draw():
        out = []
        while len(out) < n_pairs:
            s = "%016x" % rng.next()
            if s not in seen:
                seen.add(s)
                out.append(s)
        return out

    keys = draw()
    values = draw()
    gold = rng.next() % n_pairs
    return {
        "id": "kv-%d" % seed,
        "query": "What is the value of key %s?" % keys[gold],
        "context": "\n".join("%s: %s" % kv for kv in zip(keys, values)),
        "response": values[gold],
        "gold": {"kind": "sentence_set", "payload": [gold]},
    }


if __name__ == "__main__":
    n_pairs, seed, count = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3])
    for s in range(seed, seed + count):
        print(json.dumps(gen_kv(n_pairs, s), separators=(",", ":"), ensure_ascii=False))
