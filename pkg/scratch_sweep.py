"""Scratch: sweep signature families for a workable adaptation fixture."""
import sys
import time
import numpy as np
from adda import evaluate as ev
from adda import model as md
from adda import train as tr
from adda.data import ClassSignature, SynthConfig, synth_domain


def family(name):
    if name == "combs":
        spacings = [18, 26, 20, 30, 22, 34, 24, 28, 16]
        p = [300]
        for s in spacings:
            p.append(p[-1] + s)
        return tuple(ClassSignature((b, b + 900), (1.0, 0.6)) for b in p)
    if name == "combs_alt":
        spacings = [18, 26, 20, 30, 22, 34, 24, 28, 16]
        p = [300]
        for s in spacings:
            p.append(p[-1] + s)
        return tuple(ClassSignature((b, b + 900), (1.0, 0.45 if c % 2 == 0 else 0.8))
                     for c, b in enumerate(p))
    if name == "plateau":
        # 16-bin plateaus, 22-bin pitch: a 12-bin shift leaves 4 bins on the
        # own detector and pushes 10 into the neighbor's band
        out = []
        for c in range(10):
            base = 200 + 60 * c
            bins = tuple(range(base, base + 16))
            out.append(ClassSignature(bins, tuple([1.0] * 16)))
        return tuple(out)
    if name == "plateau_tight":
        out = []
        for c in range(10):
            base = 200 + 26 * c
            bins = tuple(range(base, base + 16))
            out.append(ClassSignature(bins, tuple([1.0] * 16)))
        return tuple(out)
    if name == "plateau_alt":
        out = []
        for c in range(10):
            base = 200 + 26 * c
            bins = tuple(range(base, base + 16))
            h = 1.0 if c % 2 == 0 else 0.62
            out.append(ClassSignature(bins, tuple([h] * 16)))
        return tuple(out)
    raise ValueError(name)


def run(name, pre_iters=600, ft_iters=800, spc=120, lr_mt=1e-4, lr_d=1e-4, seed=7):
    sigs = family(name)
    source = synth_domain(SynthConfig(classes=sigs, domain_shift=0,
                                      amplitude_scale=1.0, noise_sigma=0.05,
                                      samples_per_class=spc, seed=101), 0)
    target = synth_domain(SynthConfig(classes=sigs, domain_shift=12,
                                      amplitude_scale=1.5, noise_sigma=0.05,
                                      samples_per_class=spc, seed=202), 1)
    t0 = time.perf_counter()
    ext, _ = tr.pretrain(source, tr.PretrainConfig(iterations=pre_iters, seed=seed))
    src_acc = ev.evaluate_classifier(ext, source).accuracy
    tgt0 = ev.evaluate_classifier(ext, target).accuracy
    fs = md.extract_features_batch(ext, source.amplitudes)
    d0 = ev.proxy_a_distance(fs, md.extract_features_batch(ext, target.amplitudes),
                             seed=5).d_hat
    pair, _, _ = tr.adversarial_finetune(
        ext, source, target,
        tr.FinetuneConfig(iterations=ft_iters, lr_mt=lr_mt, lr_d=lr_d, seed=seed))
    tgt1 = ev.evaluate_classifier(pair.target, target).accuracy
    d1 = ev.proxy_a_distance(fs, md.extract_features_batch(pair.target,
                                                           target.amplitudes),
                             seed=5).d_hat
    dt = time.perf_counter() - t0
    print(f"{name:14s} lr_mt={lr_mt:g}: src {src_acc:.3f}  tgt0 {tgt0:.3f}  "
          f"tgt1 {tgt1:.3f}  d0 {d0:.2f} d1 {d1:.2f}  ({dt:.0f}s)")


if __name__ == "__main__":
    names = sys.argv[1:] or ["plateau", "plateau_tight", "plateau_alt", "combs_alt"]
    for n in names:
        run(n)
