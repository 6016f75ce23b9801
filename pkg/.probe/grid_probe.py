import time
from lsmlab.dataset import DatasetConfig, generate_dataset
from lsmlab.harness import design_space_grid, write_records_csv

t0 = time.time()
ds = generate_dataset(DatasetConfig(samples_per_class=20, seed=7))
alphas = [0.5, 1.375, 2.25, 3.125, 4.0]
lams = [1.0, 1.75, 2.5, 3.25, 4.0]
recs = design_space_grid(alphas, lams, ds, seeds=(0,), epochs=20, folds=2,
                         accuracy_window=5, out_dir="/root/pkg/.probe/c7_out")
print(f"grid done in {time.time()-t0:.0f}s", flush=True)
