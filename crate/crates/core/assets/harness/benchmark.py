import json
import time

from model import load_model


def load_examples(path):
    with open(path) as f:
        return [json.loads(line) for line in f]


def run_benchmark(model_name, data_path):
    model = load_model(model_name)
    examples = load_examples(data_path)
    results = []
    start = time.time()
    for example in examples:
        prediction = model.generate(example["prompt"], max_tokens=256)
        results.append({"id": example["id"], "correct": prediction.strip() == example["answer"]})
    elapsed = time.time() - start
    accuracy = sum(r["correct"] for r in results) / len(results)
    return {"accuracy": accuracy, "seconds": elapsed}
