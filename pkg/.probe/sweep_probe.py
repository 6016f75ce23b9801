import time
from lsmlab.dataset import DatasetConfig, generate_dataset
from lsmlab.reservoir import ReservoirConfig
from lsmlab.readout import ClassifierConfig
from lsmlab.harness import activity_sweep, write_records_csv, write_timings_csv

t0 = time.time()
ds = generate_dataset(DatasetConfig(samples_per_class=20, seed=7))

# c6 protocol: 12-point alpha_w sweep 0.1-4, 3 seeds, 20 epochs, 2-fold
c6_alphas = [0.1, 0.5, 0.8, 1.2, 1.5, 1.8, 2.2, 2.5, 2.8, 3.2, 3.6, 4.0]
recs = activity_sweep(c6_alphas, 2.0, ds, seeds=(0, 1, 2), epochs=20, folds=2,
                      accuracy_window=5)
write_records_csv(recs, "/root/pkg/.probe/c6_records.csv")
write_timings_csv(recs, "/root/pkg/.probe/c6_timings.csv")
print(f"c6 sweep done in {time.time()-t0:.0f}s", flush=True)

# c5 protocol: {0.5, 0.8, 2, 5} x 3 seeds
t1 = time.time()
recs5 = activity_sweep([0.5, 0.8, 2.0, 5.0], 2.0, ds, seeds=(0, 1, 2), epochs=20,
                       folds=2, accuracy_window=5)
write_records_csv(recs5, "/root/pkg/.probe/c5_records.csv")
print(f"c5 sweep done in {time.time()-t1:.0f}s", flush=True)
