scorer_params = {
    "hidden_dim": 32,
    "embed_dim": 64,
    "feature_dim": 16,
}

# desk-scale preset used by the command line; TrainConfig keeps the LoRA-scale defaults
train_params = {
    "epochs": 30,
    "batch_size": 64,
    "lr": 1e-2,
    "warmup_ratio": 0.03,
    "weight_decay": 0.0,
}

data_params = {
    "n_train": 2000,
    "n_val_in": 500,
    "n_val_out": 500,
    "noise_std": 0.15,
    "ood_shift": 0.5,
}

fdmpo_params = {
    "budget": 10,
    "samples": 256,
    "warmup_epochs": 3,
    "track_final_epochs": 10,
    "temperature": 0.7,
    "timeout": 30.0,
    "max_retries": 3,
    "model": "gpt-4o",
}

initial_definitions = {
    "visual": "Rate the visual quality of the edited image.",
    "editing": "Rate how well the edited image follows the editing instruction.",
    "preservation": "Rate how well the edited image preserves the content of the original image.",
}

# mock optimizer candidate pools; the first entry of each pool is the initial definition
candidate_pools = {
    "visual": [
        initial_definitions["visual"],
        "Judge the edited image on its own: sharpness, noise, artifacts and colour fidelity, "
        "without comparing it to the original image.",
        "Rate visual quality as a human viewer would: penalise blur, distortions, unnatural "
        "textures and visible editing seams; ignore whether the instruction was followed.",
        "Score the perceptual quality of the edited image, weighting structural artifacts "
        "more heavily than small colour shifts.",
        "Focus on sharpness and artifacts.",
    ],
    "editing": [
        initial_definitions["editing"],
        "Score whether every change requested by the instruction is present in the edited "
        "image, and whether the changes are placed on the correct object.",
        "Rate instruction fidelity: a complete and precise edit scores high, a partial edit "
        "scores middle, a missing or wrong edit scores low.",
        "Judge only the requested modification; do not reward or penalise untouched regions.",
        "Compare the instruction to the edited image and rate semantic agreement.",
    ],
    "preservation": [
        initial_definitions["preservation"],
        "Rate how much of the original image outside the edited region is unchanged: identity, "
        "layout, background and lighting.",
        "Penalise unrequested changes to objects, people and background; ignore the requested edit.",
        "Score content preservation by comparing original and edited image region by region.",
        "Judge whether the edited image still looks like the same scene as the original.",
    ],
}
