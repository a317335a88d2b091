"""Scratch: signature-geometry search for a genuine adaptation gap."""
import sys
import time
import numpy as np
import adda
from adda import evaluate as ev
from adda import model as md
from adda import train as tr
from adda.data import ClassSignature, SynthConfig, synth_domain


def make_sigs(style):
    if style == "tight":  # non-uniform narrow spacing, two parallel combs
        spacings = [18, 26, 20, 30, 22, 34, 24, 28, 16]
        p = [300]
        for s in spacings:
            p.append(p[-1] + s)
        return tuple(ClassSignature((b, b + 900), (1.0, 0.6)) for b in p)
    if style == "tight3":  # three combs
        spacings = [18, 26, 20, 30, 22, 34, 24, 28, 16]
        p = [300]
        for s in spacings:
            p.append(p[-1] + s)
        return tuple(ClassSignature((b, b + 700, b + 1400), (1.0, 0.7, 0.45))
                     for b in p)
    raise ValueError(style)


style = sys.argv[1] if len(sys.argv) > 1 else "tight"
pre_iters = int(sys.argv[2]) if len(sys.argv) > 2 else 800
ft_iters = int(sys.argv[3]) if len(sys.argv) > 3 else 1000
spc = int(sys.argv[4]) if len(sys.argv) > 4 else 200

sigs = make_sigs(style)
src_cfg = SynthConfig(classes=sigs, domain_shift=0, amplitude_scale=1.0,
                      noise_sigma=0.05, samples_per_class=spc, seed=101)
tgt_cfg = SynthConfig(classes=sigs, domain_shift=12, amplitude_scale=1.5,
                      noise_sigma=0.05, samples_per_class=spc, seed=202)

source = synth_domain(src_cfg, 0)
target = synth_domain(tgt_cfg, 1)

# nearest-centroid oracle: in-domain vs cross-domain
cents = np.stack([source.amplitudes[source.labels == c].mean(axis=0)
                  for c in range(1, 11)])
def nc_acc(ds):
    d = ((ds.amplitudes[:, None, :] - cents[None]) ** 2).sum(axis=2)
    return float(np.mean(np.argmin(d, axis=1) + 1 == ds.labels))
print(f"nearest-centroid: in-domain {nc_acc(source):.3f}  cross {nc_acc(target):.3f}")

t0 = time.perf_counter()
ext, log = tr.pretrain(source, tr.PretrainConfig(iterations=pre_iters, seed=7))
print(f"pretrain: {time.perf_counter()-t0:.0f}s loss {log.records[-1].loss_cls:.4f} "
      f"src acc {ev.evaluate_classifier(ext, source).accuracy:.4f}")
tgt0 = ev.evaluate_classifier(ext, target).accuracy
print(f"source-only target acc {tgt0:.4f}")

fs = md.extract_features_batch(ext, source.amplitudes)
dv0 = ev.proxy_a_distance(fs, md.extract_features_batch(ext, target.amplitudes), seed=5)
print(f"d_hat before {dv0.d_hat:.3f}")

t0 = time.perf_counter()
pair, disc, flog = tr.adversarial_finetune(
    ext, source, target, tr.FinetuneConfig(iterations=ft_iters, seed=7))
tgt1 = ev.evaluate_classifier(pair.target, target).accuracy
dv1 = ev.proxy_a_distance(fs, md.extract_features_batch(pair.target, target.amplitudes), seed=5)
print(f"finetune: {time.perf_counter()-t0:.0f}s  adapted acc {tgt1:.4f}  "
      f"d_hat after {dv1.d_hat:.3f}  drop {dv0.d_hat-dv1.d_hat:.3f}")
