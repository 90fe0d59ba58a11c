# Training a bilinear similarity model through the matching layer.
# Exact solving is compared with two cheaper pipelines on the same noisy data.
from diffgm import GeneratorConfig, TrainConfig, generate_dataset, train

cfg = dict(n_points=8, descriptor_dim=8, noise_sigma=0.4)
train_set = generate_dataset(GeneratorConfig(seed=1, **cfg), 32)
test_set = generate_dataset(GeneratorConfig(seed=2, **cfg), 20)

runs = [("gms", 0.0), ("gms", 2.0), ("sinkhorn", 0.0)]
for solver, alpha in runs:
    _, history = train(train_set, TrainConfig(epochs=6, alpha=alpha), solver, test_set)
    curve = " ".join(f"{h.test_acc:.2f}" for h in history)
    print(f"{solver:9s} alpha={alpha:<4}  test accuracy by epoch: {curve}")
