from pocketflow import Flow

from rewardmap.nodes import (
    BalanceAnswers,
    GenerateNetworks,
    GenerateQuestions,
    LoadDataset,
    LoadNetworks,
    MergeCurves,
    RunSweep,
    ScoreAnswers,
    SplitDataset,
    TrainPolicy,
    WriteDataset,
    WriteManifest,
    WriteNetworks,
)


def create_genmap_flow():
    """Generate synthetic networks and write one Metro Data file each."""
    generate_networks = GenerateNetworks()
    write_networks = WriteNetworks()
    write_manifest = WriteManifest()

    generate_networks >> write_networks
    write_networks >> write_manifest

    return Flow(start=generate_networks)


def create_genqa_flow():
    """Load networks, generate and balance questions, split by network and write the dataset."""
    load_networks = LoadNetworks()
    generate_questions = GenerateQuestions()
    balance_answers = BalanceAnswers()
    split_dataset = SplitDataset()
    write_dataset = WriteDataset()
    write_manifest = WriteManifest()

    load_networks >> generate_questions
    generate_questions >> balance_answers
    balance_answers >> split_dataset
    split_dataset >> write_dataset
    write_dataset >> write_manifest

    return Flow(start=load_networks)


def create_score_flow():
    load_dataset = LoadDataset()
    load_networks = LoadNetworks()
    score_answers = ScoreAnswers()
    write_manifest = WriteManifest()

    load_dataset >> load_networks
    load_networks >> score_answers
    score_answers >> write_manifest

    return Flow(start=load_dataset)


def create_train_flow():
    load_dataset = LoadDataset()
    load_networks = LoadNetworks()
    train_policy = TrainPolicy()
    write_manifest = WriteManifest()

    load_dataset >> load_networks
    load_networks >> train_policy
    train_policy >> write_manifest

    return Flow(start=load_dataset)


def create_curves_flow():
    merge_curves = MergeCurves()
    write_manifest = WriteManifest()

    merge_curves >> write_manifest

    return Flow(start=merge_curves)


def create_sweep_flow():
    load_dataset = LoadDataset()
    load_networks = LoadNetworks()
    run_sweep = RunSweep()
    write_manifest = WriteManifest()

    load_dataset >> load_networks
    load_networks >> run_sweep
    run_sweep >> write_manifest

    return Flow(start=load_dataset)


FLOW_FACTORIES = {
    "genmap": create_genmap_flow,
    "genqa": create_genqa_flow,
    "score": create_score_flow,
    "train": create_train_flow,
    "curves": create_curves_flow,
    "sweep": create_sweep_flow,
}
