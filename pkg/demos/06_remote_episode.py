"""Walkthrough: driving the environment over the wire.

A policy living in another process (a trainer, another language, another
machine) talks to the environment in line-delimited JSON. Here the server
runs in a background thread and a client plays one episode, pairing atoms by
hand exactly like demo 04 but through flat cell indices.
"""

import json

from atomgame.protocol import ProtocolClient, serve_tcp

server = serve_tcp("127.0.0.1", 0)
server.serve_background()
print(f"environment server on port {server.port}")

client = ProtocolClient("127.0.0.1", server.port)
print("hello ->", client.request("hello", version=1))

circuit = json.load(open("benchmarks/random14.json"))
resp = client.request(
    "reset",
    circuit=circuit,
    grid={"rows": 4, "cols": 10},
    params={"alpha": 0.02, "beta": 0.002},
    window=2,
    seed=1,
    layout_mode="random",
)
obs = resp["obs"]
print(f"episode of {obs['T']} chunks, {len(obs['positions'])} atoms")


def pair_targets(obs):
    cols = obs["grid"]["cols"]
    taken = {tuple(p) for p in obs["positions"]}
    targets = []
    for a, b in obs["chunks"][0]:
        ca, cb = obs["positions"][a], obs["positions"][b]
        if abs(ca[0] - cb[0]) + abs(ca[1] - cb[1]) == 1 or b not in obs["playable"]:
            continue
        for dc, dr in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            cell = (ca[0] + dc, ca[1] + dr)
            if 0 <= cell[0] < cols and 0 <= cell[1] < obs["grid"]["rows"] and cell not in taken:
                taken.discard(tuple(cb))
                taken.add(cell)
                targets.append({"atom": b, "cell": cell[1] * cols + cell[0]})
                break
    return targets


total = 0.0
while not resp["done"]:
    resp = client.request("step", targets=pair_targets(resp["obs"]))
    total += resp["reward"]
    print(f"  t={resp['obs']['t']}: reward {resp['reward']:+.4f}")

print(f"total reward over the wire: {total:.4f}")
client.close()
server.shutdown()
server.server_close()
