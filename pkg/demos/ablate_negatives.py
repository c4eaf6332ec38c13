"""Does the contrastive loss need negatives? Dense graphs versus a sparse node task."""

from dataclasses import replace

from infogcl.pipeline import TrainConfig, ablate_negatives
from infogcl.synthetic import dense_graph_dataset, sparse_node_task

dense = ablate_negatives(TrainConfig(epochs=10, batch_size=64), dense_graph_dataset(300, 0))
print(f"dense graphs:  infonce {dense.with_negatives.mean:.3f}  negfree {dense.without_negatives.mean:.3f}")

nodes = sparse_node_task(seed=0)
sparse = ablate_negatives(replace(TrainConfig.default_for(nodes)), nodes)
print(f"sparse nodes:  infonce {sparse.with_negatives.mean:.3f}  negfree {sparse.without_negatives.mean:.3f}")
