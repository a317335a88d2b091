"""Scratch: pilot the end-to-end adaptation fixture."""
import sys
import time
import numpy as np
import adda
from adda import evaluate as ev
from adda import model as md
from adda import train as tr
from adda.data import SynthConfig, default_class_signatures, synth_domain

pre_iters = int(sys.argv[1]) if len(sys.argv) > 1 else 800
ft_iters = int(sys.argv[2]) if len(sys.argv) > 2 else 1000
spc = int(sys.argv[3]) if len(sys.argv) > 3 else 200

sigs = default_class_signatures(10)
src_cfg = SynthConfig(classes=sigs, domain_shift=0, amplitude_scale=1.0,
                      noise_sigma=0.05, samples_per_class=spc, seed=101)
tgt_cfg = SynthConfig(classes=sigs, domain_shift=12, amplitude_scale=1.5,
                      noise_sigma=0.05, samples_per_class=spc, seed=202)

t0 = time.perf_counter()
source = synth_domain(src_cfg, 0)
target = synth_domain(tgt_cfg, 1)
print(f"synth: {time.perf_counter()-t0:.1f}s  ({len(source)} + {len(target)} samples)")

t0 = time.perf_counter()
ext, log = tr.pretrain(source, tr.PretrainConfig(iterations=pre_iters, seed=7))
print(f"pretrain {pre_iters} iters: {time.perf_counter()-t0:.1f}s  "
      f"final loss {log.records[-1].loss_cls:.4f}")

src_rep = ev.evaluate_classifier(ext, source)
tgt_rep0 = ev.evaluate_classifier(ext, target)
print(f"source acc {src_rep.accuracy:.4f}   source-only target acc {tgt_rep0.accuracy:.4f}")

fs = md.extract_features_batch(ext, source.amplitudes)
ft0 = md.extract_features_batch(ext, target.amplitudes)
div_before = ev.proxy_a_distance(fs, ft0, seed=5)
print(f"d_hat before (M_S(x_S) vs M_S(x_T)): {div_before.d_hat:.3f} (eps {div_before.epsilon:.3f})")

t0 = time.perf_counter()
pair, disc, flog = tr.adversarial_finetune(
    ext, source, target, tr.FinetuneConfig(iterations=ft_iters, seed=7))
print(f"finetune {ft_iters} iters: {time.perf_counter()-t0:.1f}s  "
      f"last d-loss {flog.records[-1].loss_d:.4f} mt-loss {flog.records[-1].loss_mt:.4f}")

tgt_rep1 = ev.evaluate_classifier(pair.target, target)
print(f"adapted target acc {tgt_rep1.accuracy:.4f}")
ft1 = md.extract_features_batch(pair.target, target.amplitudes)
div_after = ev.proxy_a_distance(fs, ft1, seed=5)
print(f"d_hat after (M_S(x_S) vs M_T(x_T)): {div_after.d_hat:.3f} (eps {div_after.epsilon:.3f})")
print(f"drop: {div_before.d_hat - div_after.d_hat:.3f}")
