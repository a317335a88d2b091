"""Adversarial domain adaptation for 1-D frequency-spectrum fault diagnosis.

A self-contained numpy implementation: a from-scratch 1-D CNN engine with
hand-derived gradients, FFT preprocessing of vibration signals, the two-stage
pretrain/adversarial-finetune procedure with partially untied target layers,
and an evaluation suite with per-class precision/recall and a proxy
domain-divergence estimator.
"""

from .data import (ClassSignature, DomainDataset, Manifest, ManifestError,
                   SynthConfig, default_class_signatures, load_domain,
                   sample_minibatch, synth_domain)
from .evaluate import (DivergenceReport, MetricsReport, evaluate_classifier,
                       export_features, metrics_from_confusion,
                       proxy_a_distance)
from .model import (Discriminator, FeatureExtractor, TiedPair,
                    build_discriminator, build_extractor,
                    discriminator_forward, extract_features,
                    extract_features_batch, init_target_from_source,
                    load_model, predict_label, save_model)
from .nn import (AdamState, GradientBundle, LayerKind, LayerParams, LayerSpec,
                 adam_step, layer_backward, layer_forward, logistic_loss,
                 softmax, softmax_xent_loss)
from .spectrum import (RawSignal, SpectrumSample, fft_radix2, ifft_radix2,
                       make_spectrum, window_signal)
from .train import (FinetuneConfig, PretrainConfig, TrainLog, TrainRecord,
                    adversarial_finetune, pretrain)

__version__ = "0.1.0"
