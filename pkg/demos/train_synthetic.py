"""Train on triangle-count graphs and report the linear-probe accuracy."""

from dataclasses import replace

from infogcl.pipeline import TrainConfig, train_and_evaluate
from infogcl.synthetic import triangle_count_dataset

dataset = triangle_count_dataset(300, seed=0)
config = replace(TrainConfig.default_for(dataset), epochs=10, batch_size=64)


def progress(run, epoch, loss):
    print(f"run {run} epoch {epoch:2d} loss {loss:.4f}")


result = train_and_evaluate(config, dataset, runs=1, on_epoch=progress)
print(f"accuracy {result.mean:.4f} +- {result.std:.4f}")
