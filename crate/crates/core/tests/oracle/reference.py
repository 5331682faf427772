#!/usr/bin/env python3
"""Independent reference computations used to freeze expected values in the
Rust test-suite. Uses only hashlib; shares no code with the crate."""
import hashlib

def sha(b):
    return hashlib.sha256(b).digest()

def u(b):
    return int.from_bytes(b, "big")

def be(x, n):
    return x.to_bytes(n, "big")

def rank(value, ids):
    return sorted(ids, key=lambda i: (sha(be(value, 32) + be(i, 8)), i))

def chunk(ranked, n):
    m = len(ranked) // n
    return [ranked[g * n:(g + 1) * n] for g in range(m)], ranked[m * n:]

def stage_preimage(rnd, group, stage, node, inp):
    return be(rnd, 8) + be(group, 4) + be(stage, 2) + be(node, 8) + be(inp, 32)

def first_nonce(prefix, threshold, start=0):
    nonce = start
    while True:
        d = u(sha(prefix + be(nonce, 8)))
        if d < threshold:
            return nonce, d, nonce - start + 1
        nonce += 1

def rng_block(seed, label, i):
    return sha(be(seed, 8) + label + be(i, 8))

def node_secret(seed, node):
    return rng_block(seed, b"node/" + be(node, 8), 0)

def contribution(seed, node, rnd):
    return u(sha(node_secret(seed, node) + be(rnd, 8)))

def payload(rnd):
    return u(sha(b"payload" + be(rnd, 8)))

def hx(x):
    return "%064x" % x

print("== hashcash digest vectors")
print(hx(u(sha(b""))))
print(hx(u(sha(b"abc"))))

print("== select_contributors value=0x5eed..., ids 0..15, k=4")
v = int("5eed" * 16, 16)
print(rank(v, range(16))[:4])

print("== form_teams value=0 ids 1..4 N=2")
print(chunk(rank(0, [1, 2, 3, 4]), 2))

print("== advance_beacon genesis=0x01.. contributions")
cs = [int("11" * 32, 16), int("2" + "0" * 63, 16), 0xdeadbeef]
acc = 0
for c in cs:
    acc ^= c
print(hx(acc))

print("== search prefix=b'pots-search' threshold=2^248")
print(first_nonce(b"pots-search", 1 << 248))

print("== stage_preimage round=7 group=3 stage=2 node=0x0102030405060708 input=0xab..")
print(stage_preimage(7, 3, 2, 0x0102030405060708, int("ab" * 32, 16)).hex())

print("== team chain N=2 p_total=2^-8 (stage 2^249) round=1 group=0 team=[5,9] root=sha('root')")
root = u(sha(b"root"))
inp = root
for idx, node in enumerate([5, 9], start=1):
    n, d, a = first_nonce(stage_preimage(1, 0, idx, node, inp), 1 << 249)
    print(idx, node, n, hx(d), a)
    inp = d

print("== pow stochastic round=1 miners [0,1] p=2^-8")
def pow_first(rnd, miner, thr):
    n, d, a = first_nonce(be(rnd, 8) + be(miner, 8), thr)
    return n + 1, d
res = sorted((pow_first(1, m, 1 << 248)[0], pow_first(1, m, 1 << 248)[1], m) for m in [0, 1])
print(res[0][2], res[0][0], hx(res[0][1]))

print("== rng block seed=0 label='arm/pow' i=0")
print(rng_block(0, b"arm/pow", 0).hex())

print("== node secret/contribution seed=42 node=3 round=1")
print(hx(contribution(42, 3, 1)))

print("== simnet stochastic round 1: seed=7 n=4 N=2 k=4 genesis=0 threshold_total=2^248")
def sim_round(seed, n, N, k, genesis, thr_total, rnd):
    ids = list(range(n))
    contributors = rank(genesis, ids)[:k]
    value = 0
    for c in contributors:
        value ^= contribution(seed, c, rnd)
    groups, benched = chunk(rank(value, ids), N)
    root = u(sha(be(value, 32) + be(payload(rnd), 32)))
    stage_thr = min(thr_total * N, (1 << 256) - 1)
    completions = []
    for g, team in enumerate(groups):
        tick = 0
        inp = root
        for s, node in enumerate(team, start=1):
            nn, d, a = first_nonce(stage_preimage(rnd, g, s, node, inp), stage_thr)
            tick += a
            inp = d
        completions.append((tick, inp, g))
    winner = min(completions)
    # every team is busy every tick until the winner's completion (zero latency)
    energy = sum(min(t, winner[0]) for t, _, _ in completions)
    return value, groups, benched, winner, energy
value, groups, benched, winner, energy = sim_round(7, 4, 2, 4, 0, 1 << 248, 1)
print(hx(value)); print(groups, benched)
print("winner group", winner[2], "tick", winner[0], "final", hx(winner[1]), "energy", energy)
