"""
The desk-scale model harness
============================

Logistic regression (accelerated full-batch gradient descent) and a random
forest (bagged CART trees with sqrt-feature subsampling) with random-search
hyperparameter tuning, evaluated with the six standard metrics, plus
permutation importance for interpretation.
"""

from dqa.cleaning import CleaningParams, apply_transform_to_test, clean, parse_order
from dqa.dataset import split_stratified
from dqa.interpret import permutation_importance
from dqa.learners import evaluate, random_search, train
from dqa.synthetic import make_dirty_dataset

ds, _ = make_dirty_dataset(seed=2, rows=300, informative=6, noise=3)
train_side, test_side = split_stratified(ds, 0.8, seed=1)

cleaned, _, transform_params = clean(
    train_side.with_active_label("heuristic"), parse_order("FiTrMiOv"), CleaningParams(), seed=1
)
test_view = apply_transform_to_test(test_side, transform_params)
print(f"training view: {cleaned.n_rows}x{cleaned.n_features}, "
      f"test view: {test_view.n_rows}x{test_view.n_features}")

for learner in ("logreg", "forest"):
    hp = random_search(cleaned, learner, n_iter=10, k=3, seed=5)
    model = train(learner, cleaned, hp, seed=6)
    result = evaluate(model, test_view)
    print(f"\n{learner}: tuned {hp}")
    for metric, value in result.as_dict().items():
        print(f"  {metric:<10} {value:.3f}")
    importance = permutation_importance(model, test_view, metric="auroc", repeats=5, seed=7)
    top = sorted(importance.scores.items(), key=lambda kv: -kv[1])[:3]
    print("  top features by permutation importance:")
    for name, score in top:
        print(f"    {name:<12} {score:+.3f}")
