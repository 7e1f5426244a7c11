"""
Passes per batch and number of retrieved prompts
================================================

Sweeps the number of optimisation passes over each batch and the number
of prompts concatenated at inference on one overlapping stream.
"""

from f2ocl import EncoderConfig, StreamConfig, TrainConfig, generate_synthetic_stream, run_experiment

stream, test = generate_synthetic_stream(
    StreamConfig(num_groups=4, classes_per_group=5, cluster_separation=0.6, cluster_spread=0.3, seed=0)
)

print("passes  K=1    K=2")
for passes in (1, 5, 10):
    res = run_experiment(stream, test, TrainConfig(passes=passes), EncoderConfig(), ks=(1, 2), ablation=False, key_metrics=False)
    print(f"{passes:>6}  {res.record(1).final_A:.3f}  {res.record(2).final_A:.3f}")
