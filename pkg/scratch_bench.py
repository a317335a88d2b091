"""Scratch: smoke-test nn core and time a Table-2-shaped batched fwd/bwd."""
import time
import numpy as np
from adda import nn

rng = np.random.default_rng(0)

# smoke: conv oracle [1,0,-1] on [1,2,3,4]
spec = nn.conv1d(3, 1, 1, 1)
p = nn.LayerParams(np.array([1.0, 0.0, -1.0]).reshape(3, 1, 1), np.zeros(1))
y, _ = nn.layer_forward(spec, p, np.array([[1.0], [2.0], [3.0], [4.0]]))
print("conv oracle:", y.ravel())  # expect [-2, -2]

# smoke: pool
ps = nn.maxpool1d(2, 2, 1)
y, c = nn.layer_forward(ps, nn.LayerParams(), np.array([[1.0], [3.0], [2.0], [0.0]]))
print("pool:", y.ravel(), "argmax:", c.argmax.ravel())  # [3,2], {1,2}

# build the seven-block stack shapes
specs = []
chain = [(32, 2, 1, 8), (16, 2, 8, 16), (8, 2, 16, 32), (8, 2, 32, 32), (3, 2, 32, 64)]
for k, s, ci, co in chain:
    specs += [nn.conv1d(k, s, ci, co), nn.relu(), nn.maxpool1d(2, 2, co)]
specs += [nn.dense(64, 500), nn.relu(), nn.dense(500, 10)]
params = [nn.init_params(sp, rng) for sp in specs]

x = rng.normal(size=(2048, 1))
h = x
shapes = []
for sp, pp in zip(specs, params):
    h, _ = nn.layer_forward(sp, pp, h)
    shapes.append(h.shape)
print("shape chain:", shapes)

# batched timing
B = 64
X = rng.normal(size=(B, 2048, 1))
t0 = time.perf_counter()
reps = 10
for _ in range(reps):
    h = X
    caches = []
    for sp, pp in zip(specs, params):
        h, c = nn.layer_forward(sp, pp, h)
        caches.append(c)
fwd = (time.perf_counter() - t0) / reps
print(f"batched forward B={B}: {fwd*1000:.1f} ms")

t0 = time.perf_counter()
for _ in range(reps):
    h = X
    caches = []
    for sp, pp in zip(specs, params):
        h, c = nn.layer_forward(sp, pp, h)
        caches.append(c)
    g = np.ones_like(h)
    for sp, pp, c in zip(reversed(specs), reversed(params), reversed(caches)):
        g, _ = nn.layer_backward(sp, pp, c, g)
full = (time.perf_counter() - t0) / reps
print(f"batched fwd+bwd B={B}: {full*1000:.1f} ms")
