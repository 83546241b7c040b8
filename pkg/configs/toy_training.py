"""Stand-in for a training script: reads its hyperparameters from the
environment and prints a fake validation loss as the last stdout line."""

import math
import os

lr = float(os.environ["PHS_PARAM_LR"])
wd = float(os.environ["PHS_PARAM_WD"])
batch = int(os.environ["PHS_PARAM_BATCH_SIZE"])

print(f"training with lr={lr} wd={wd} batch={batch}")
loss = (math.log10(lr) + 2.0) ** 2 + 100.0 * (wd - 0.004) ** 2 + 0.05 * math.log2(batch / 64) ** 2
print(f"{loss + 0.3:.6f}")
