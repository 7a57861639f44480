"""Regenerate src/scenic/data/models/gridquest_tour.p2m.

Trains the bottleneck network on (screenshot, memory) pairs from playback
of every bundled GridQuest trace.

    python scripts/train_bundled_model.py
"""

from pathlib import Path

from scenic.archive import merged, training_pairs
from scenic.embed import TrainConfig, train_bottleneck
from scenic.trace import bundled_traces, playback

OUT = Path(__file__).resolve().parents[1] / "src" / "scenic" / "data" / "models" / "gridquest_tour.p2m"


def main():
    archive = merged(*(playback(t, "gridquest") for t in bundled_traces("gridquest")))
    model, history = train_bottleneck(training_pairs(archive), TrainConfig(epochs=200), fresh_seed=0)
    model.meta["trained_on"] = "bundled gridquest traces"
    model.save(OUT)
    print(f"{len(archive)} pairs, loss {history[0]:.5f} -> {history[-1]:.5f}, wrote {OUT}")


if __name__ == "__main__":
    main()
