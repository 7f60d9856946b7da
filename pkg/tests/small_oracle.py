"""Hand-written replay of the wake-up protocol on a 4-node (N=2) network.

Plain integers and lists only; shares nothing with the scheduler module
except the generator/hash primitives, which are tested on their own.
"""

from chaos_sentinel.primitives import CiGenerator, SecretKey, ci_hash, expand_key, splitmix64

ORACLE_KEY_SEED = 2026
ORACLE_N = 2
ORACLE_R = 2
ORACLE_TICKS = 10


def oracle_trace(key_seed=ORACLE_KEY_SEED, N=ORACLE_N, r=ORACLE_R, ticks=ORACLE_TICKS, fraction=0.5):
    key = SecretKey.from_seed(key_seed)
    n_nodes = 1 << N
    act = expand_key(key, 0, 2)[0]
    gens, state, e, pending, fresh = [], [], [], [0] * n_nodes, [False] * n_nodes
    for i in range(n_nodes):
        gens.append(CiGenerator.from_key(key, i, 0))
        state.append(expand_key(key, i, 1, length=N)[2].value)
        u = (act.next() >> 11) / float(1 << 53)
        e.append(r if u < fraction else 0)

    out = []
    for j in range(1, ticks + 1):
        # steps 1-2: absorb last tick's orders
        for i in range(n_nodes):
            if pending[i]:
                if e[i] == 0:
                    e[i] = pending[i] * r
                    fresh[i] = True
                else:
                    e[i] += pending[i] * r
                pending[i] = 0
        active = [i for i in range(n_nodes) if e[i] > 0]
        resets, orders = [], []
        for i in active:
            if fresh[i]:
                sensed = splitmix64(splitmix64(j) ^ i)
                gens[i].reseed(ci_hash(sensed.to_bytes(8, "little")), j)
                state[i] = i
                fresh[i] = False
                resets.append(i)
            mask = gens[i].next_int(N)
            state[i] ^= mask
            e[i] -= 1
            if e[i] == 0:
                orders.append((i, state[i]))
        for _, k in orders:
            pending[k] += 1
        glob = sum(state[k] << (k * N) for k in range(n_nodes))
        out.append((j, tuple(active), tuple(orders), tuple(resets), glob))
    return out
