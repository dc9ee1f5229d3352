import csv
import json
import os

from pocketflow import BatchNode, Node

from rewardmap.curriculum import build_plan, write_plan_manifest
from rewardmap.errors import AlignmentError, RewardMapError, UsageError, ValidationError
from rewardmap.grpo_sim import (
    LOG_COLUMNS,
    TrainConfig,
    TrainingLog,
    evaluate,
    resolve_mode,
    steps_to_validity,
    sweep,
    train,
    write_sweep_csv,
)
from rewardmap.qa_generator import (
    balance_yes_no,
    choose_holdout,
    dataset_report,
    generate,
    read_dataset,
    split_dataset,
    write_dataset,
)
from rewardmap.reward_engine import (
    SUBSTITUTE_FLAGS,
    RewardConfig,
    RewardEngine,
    error_record,
    score_record,
    summarize_scores,
)
from rewardmap.transit_graph import (
    NetworkSpec,
    generate_synthetic_network,
    load_network,
    write_network,
)
from rewardmap.utils.crawl_network_files import crawl_network_files
from rewardmap.utils.manifest import RunManifest
from rewardmap.utils.run_log import get_logger
from rewardmap.utils.seeding import derive_seed

logger = get_logger("nodes")


def write_json(path, data):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def record_output(shared, filename):
    if filename not in shared["outputs"]:
        shared["outputs"].append(filename)


class LoadNetworks(Node):
    def prep(self, shared):
        return {
            "directory": shared.get("networks_dir"),
            "include_patterns": shared.get("include_patterns"),
            "exclude_patterns": shared.get("exclude_patterns"),
            "required": shared.get("networks_required", True),
        }

    def exec(self, prep_res):
        if not prep_res["directory"]:
            if prep_res["required"]:
                raise UsageError("This command needs --networks")
            return {}
        print(f"Loading networks from: {prep_res['directory']}...")
        result = crawl_network_files(
            prep_res["directory"],
            include_patterns=prep_res["include_patterns"],
            exclude_patterns=prep_res["exclude_patterns"],
        )
        networks = {}
        for path, content in result["files"].items():
            try:
                net = load_network(content)
            except RewardMapError as e:
                e.args = (f"{path}: {e}",)
                raise
            if net.network_id in networks:
                raise ValidationError(f"{path}: duplicate network_id '{net.network_id}'")
            networks[net.network_id] = net
        if not networks:
            raise UsageError(f"No network files found in {prep_res['directory']}")
        print(f"Loaded {len(networks)} networks.")
        return dict(sorted(networks.items()))

    def post(self, shared, prep_res, exec_res):
        shared["networks"] = exec_res
        shared["inputs"]["networks"] = prep_res["directory"]


class GenerateNetworks(BatchNode):
    def prep(self, shared):
        spec = NetworkSpec.from_mapping(shared["config"]["network"])
        seed = shared["seed"]
        print(f"Generating {shared['count']} synthetic networks (seed {seed})...")
        return [
            (spec, derive_seed("genmap", seed, i), f"synth-{seed}-{i:03d}")
            for i in range(shared["count"])
        ]

    def exec(self, item):
        spec, network_seed, network_id = item
        return generate_synthetic_network(network_seed, spec, network_id=network_id)

    def post(self, shared, prep_res, exec_res_list):
        shared["networks"] = {net.network_id: net for net in exec_res_list}
        print(f"Generated {len(exec_res_list)} networks.")


class WriteNetworks(Node):
    def prep(self, shared):
        return shared["out_dir"], list(shared["networks"].values())

    def exec(self, prep_res):
        out_dir, networks = prep_res
        filenames = []
        for net in networks:
            filename = f"{net.network_id}.json"
            write_network(net, os.path.join(out_dir, filename))
            print(f"  - Wrote {filename} ({net.difficulty}, {len(net.lines)} lines)")
            filenames.append(filename)
        return filenames

    def post(self, shared, prep_res, exec_res):
        for filename in exec_res:
            record_output(shared, filename)


class GenerateQuestions(BatchNode):
    def prep(self, shared):
        quotas = shared["config"]["quotas"]
        # A dataset carries exactly one global line-count question per network
        if quotas.get("global_count", 0) != 1:
            raise UsageError(f"genqa needs quotas.global_count = 1, got {quotas.get('global_count', 0)}")
        return [(net, shared["seed"], quotas) for net in shared["networks"].values()]

    def exec(self, item):
        net, seed, quotas = item
        return generate(net, seed, quotas)

    def post(self, shared, prep_res, exec_res_list):
        shared["items"] = [item for items in exec_res_list for item in items]
        print(f"Generated {len(shared['items'])} questions over {len(exec_res_list)} networks.")


class BalanceAnswers(Node):
    def prep(self, shared):
        return shared["items"], shared["seed"], shared["networks"]

    def exec(self, prep_res):
        items, seed, networks = prep_res
        print("Balancing yes/no answers...")
        return balance_yes_no(items, seed, networks)

    def post(self, shared, prep_res, exec_res):
        shared["items"] = exec_res


class SplitDataset(Node):
    def prep(self, shared):
        split_cfg = shared["config"]["split"]
        network_ids = list(shared["networks"])
        holdout = shared.get("holdout")
        if holdout is None:
            holdout = choose_holdout(
                network_ids,
                shared["seed"],
                count=split_cfg.get("holdout_count"),
                fraction=split_cfg.get("holdout_fraction"),
            )
        return shared["items"], set(holdout)

    def exec(self, prep_res):
        items, holdout = prep_res
        print(f"Holding out {len(holdout)} networks for the test split...")
        return split_dataset(items, holdout)

    def post(self, shared, prep_res, exec_res):
        shared["train_items"], shared["test_items"] = exec_res
        shared["holdout"] = sorted(prep_res[1])


class WriteDataset(Node):
    def prep(self, shared):
        return shared["out_dir"], shared["train_items"], shared["test_items"], shared["holdout"]

    def exec(self, prep_res):
        out_dir, train_items, test_items, holdout = prep_res
        write_dataset(train_items, os.path.join(out_dir, "train.jsonl"))
        write_dataset(test_items, os.path.join(out_dir, "test.jsonl"))
        report = dataset_report(train_items + test_items)
        report["holdout_networks"] = holdout
        write_json(os.path.join(out_dir, "balance_report.json"), report)
        for qtype, counts in report["yes_no"].items():
            print(f"  - {qtype}: {counts['yes']} yes / {counts['no']} no")
        print(f"Wrote {len(train_items)} train and {len(test_items)} test items.")
        return ["train.jsonl", "test.jsonl", "balance_report.json"]

    def post(self, shared, prep_res, exec_res):
        for filename in exec_res:
            record_output(shared, filename)


class LoadDataset(Node):
    def prep(self, shared):
        return shared.get("dataset_paths") or [], shared.get("eval_dataset_paths") or []

    def exec(self, prep_res):
        dataset_paths, eval_paths = prep_res
        if not dataset_paths:
            raise UsageError("This command needs --dataset")
        loaded = []
        for paths in (dataset_paths, eval_paths):
            items = []
            for path in paths:
                if not os.path.isfile(path):
                    raise UsageError(f"Dataset file does not exist: {path}")
                items.extend(read_dataset(path))
            loaded.append(items)
        print(f"Loaded {len(loaded[0])} items ({len(loaded[1])} held-out).")
        return loaded

    def post(self, shared, prep_res, exec_res):
        shared["items"], shared["eval_items"] = exec_res
        shared["inputs"]["dataset"] = list(prep_res[0])
        if prep_res[1]:
            shared["inputs"]["eval_dataset"] = list(prep_res[1])


def read_answers(path):
    """
    Answers file: JSONL records {"qa_id": ..., "answer": ...}, or one JSON
    object mapping qa_id -> answer text.

    Returns:
        list of (qa_id, text) in file order
    """
    if not os.path.isfile(path):
        raise UsageError(f"Answers file does not exist: {path}")
    with open(path, "r", encoding="utf-8") as f:
        content = f.read()
    if not content.strip():
        raise UsageError(f"Answers file is empty: {path}")

    try:
        document = json.loads(content)
    except json.JSONDecodeError:
        document = None
    if isinstance(document, dict) and "qa_id" not in document:
        return [(str(k), v) for k, v in document.items()]

    answers = []
    for lineno, line in enumerate(content.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            answers.append((str(record["qa_id"]), record.get("answer", "")))
        except (json.JSONDecodeError, KeyError, TypeError):
            raise UsageError(f"{path} line {lineno}: expected a JSON record with qa_id and answer")
    return answers


class ScoreAnswers(BatchNode):
    def prep(self, shared):
        self.engine = RewardEngine(RewardConfig.from_mapping(shared["config"]["reward"]))
        self.items = {item.qa_id: item for item in shared["items"]}
        self.networks = shared.get("networks") or {}
        answers = read_answers(shared["answers_path"])
        shared["inputs"]["answers"] = shared["answers_path"]
        print(f"Scoring {len(answers)} answers...")
        return answers

    def exec(self, answer):
        qa_id, text = answer
        item = self.items.get(qa_id)
        if item is None:
            return qa_id, None, error_record(qa_id, f"Unknown qa_id '{qa_id}'")
        if not isinstance(text, str):
            return qa_id, None, error_record(qa_id, "Answer text must be a string")
        try:
            breakdown = self.engine.score(item, text, self.networks.get(item.network_id))
        except UsageError as e:
            return qa_id, None, error_record(qa_id, str(e))
        return qa_id, (item, breakdown), score_record(item, text, breakdown)

    def post(self, shared, prep_res, exec_res_list):
        out_dir = shared["out_dir"]
        with open(os.path.join(out_dir, "scores.jsonl"), "w", encoding="utf-8", newline="\n") as f:
            for _, _, record in exec_res_list:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")

        scored = [pair for _, pair, _ in exec_res_list if pair is not None]
        errors = [record for _, pair, record in exec_res_list if pair is None]
        summary = summarize_scores(
            scored, self.engine.cfg, shared["config"]["eval_weights"], error_count=len(errors)
        )
        write_json(os.path.join(out_dir, "score_summary.json"), summary)
        record_output(shared, "scores.jsonl")
        record_output(shared, "score_summary.json")

        for record in errors:
            logger.error(f"Could not score {record['qa_id']}: {record['error']}")
        if errors:
            print(f"{len(errors)} answer(s) could not be scored; see scores.jsonl")
            shared["exit_code"] = 1
        accuracy = summary["summary"]["weighted_accuracy"]
        if accuracy is not None:
            print(f"Weighted accuracy: {accuracy:.4f}")


def train_config_from(shared):
    config = shared["config"]
    return TrainConfig.from_mapping(
        {
            **config["train"],
            "seed": shared["seed"],
            "epochs_per_stage": config["curriculum"]["epochs_per_stage"],
            "stage_epochs": config["curriculum"].get("stage_epochs") or {},
        }
    )


def _check_disjoint(items, eval_items):
    overlap = sorted({i.network_id for i in items} & {i.network_id for i in eval_items})
    if overlap:
        raise UsageError(f"Evaluation items share networks with training: {', '.join(overlap)}")


class TrainPolicy(Node):
    def prep(self, shared):
        config = shared["config"]
        _check_disjoint(shared["items"], shared["eval_items"])
        return {
            "pool": shared["items"],
            "eval_items": shared["eval_items"],
            "networks": shared["networks"],
            "cfg": train_config_from(shared),
            "reward_cfg": RewardConfig.from_mapping(config["reward"]),
            "eval_weights": config["eval_weights"],
            "granularity": config["curriculum"]["granularity"],
            "mode": shared["mode"],
            "out_dir": shared["out_dir"],
        }

    def exec(self, prep_res):
        cfg = prep_res["cfg"]
        pool = prep_res["pool"]
        plan = build_plan(pool, prep_res["granularity"], cfg.seed) if pool else None
        used_plan, _ = resolve_mode(prep_res["mode"], pool, plan, prep_res["reward_cfg"], cfg.seed)
        print(
            f"Training in {prep_res['mode']} mode: {used_plan.item_count} items, "
            f"{len(used_plan.stages)} stage(s), K={cfg.K}..."
        )
        log = train(
            pool,
            plan,
            prep_res["networks"],
            cfg,
            prep_res["reward_cfg"],
            prep_res["mode"],
            prep_res["eval_items"],
            prep_res["eval_weights"],
            dump_dir=prep_res["out_dir"],
        )
        final_eval = None
        if prep_res["eval_items"]:
            final_eval = evaluate(
                log.policy,
                prep_res["eval_items"],
                prep_res["networks"],
                prep_res["reward_cfg"],
                prep_res["eval_weights"],
                cfg.max_segments,
                train_network_ids={i.network_id for i in pool},
            )
        return used_plan, log, final_eval

    def post(self, shared, prep_res, exec_res):
        used_plan, log, final_eval = exec_res
        out_dir = shared["out_dir"]
        cfg = prep_res["cfg"]
        log.to_csv(os.path.join(out_dir, "training_log.csv"))
        write_plan_manifest(
            used_plan, os.path.join(out_dir, "plan.json"), cfg.epochs_per_stage, cfg.stage_epochs
        )
        write_json(os.path.join(out_dir, "policy.json"), log.policy.to_dict())
        write_json(
            os.path.join(out_dir, "metrics.json"),
            {
                "mode": prep_res["mode"],
                "granularity": used_plan.granularity,
                "steps": len(log.rows),
                "steps_to_validity": steps_to_validity(log),
                "final_eval": final_eval,
                "plan_warnings": list(used_plan.warnings),
            },
        )
        for filename in ("training_log.csv", "plan.json", "policy.json", "metrics.json"):
            record_output(shared, filename)
        print(f"Finished {len(log.rows)} steps; log written to {out_dir}")


class MergeCurves(Node):
    def prep(self, shared):
        return shared["curve_logs"]

    def exec(self, prep_res):
        if not prep_res:
            raise UsageError("curves needs at least one --log LABEL=PATH")
        logs = []
        for label, path in prep_res:
            if not os.path.isfile(path):
                raise UsageError(f"Training log does not exist: {path}")
            logs.append((label, TrainingLog.from_csv(path, mode=label)))

        reference_label, reference = logs[0]
        for label, log in logs[1:]:
            if log.steps != reference.steps:
                raise AlignmentError(
                    f"Step grids differ: {reference_label} has {len(reference.steps)} steps, "
                    f"{label} has {len(log.steps)}"
                )

        value_columns = [c for c in LOG_COLUMNS if c != "step"]
        header = ["step"] + [f"{label}_{c}" for label, _ in logs for c in value_columns]
        rows = []
        for index, step in enumerate(reference.steps):
            row = [step]
            for _, log in logs:
                row.extend(log.rows[index][c] for c in value_columns)
            rows.append(row)
        print(f"Merged {len(logs)} logs over {len(rows)} steps.")
        return header, rows

    def post(self, shared, prep_res, exec_res):
        header, rows = exec_res
        with open(os.path.join(shared["out_dir"], "curves.csv"), "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        shared["inputs"]["logs"] = {label: path for label, path in prep_res}
        record_output(shared, "curves.csv")


class RunSweep(Node):
    def prep(self, shared):
        config = shared["config"]
        _check_disjoint(shared["items"], shared["eval_items"])
        return {
            "pool": shared["items"],
            "eval_items": shared["eval_items"],
            "networks": shared["networks"],
            "cfg": train_config_from(shared),
            "reward_cfg": RewardConfig.from_mapping(config["reward"]),
            "eval_weights": config["eval_weights"],
            "seeds": shared["sweep_seeds"],
            "modes": shared["sweep_modes"],
            "granularities": shared["sweep_granularities"],
        }

    def exec(self, prep_res):
        runs = len(prep_res["seeds"]) * len(prep_res["modes"]) * len(prep_res["granularities"])
        print(f"Sweeping up to {runs} training runs...")
        return sweep(
            prep_res["pool"],
            prep_res["networks"],
            prep_res["cfg"],
            prep_res["reward_cfg"],
            prep_res["seeds"],
            prep_res["modes"],
            prep_res["granularities"],
            prep_res["eval_items"] or None,
            prep_res["eval_weights"],
        )

    def post(self, shared, prep_res, exec_res):
        write_sweep_csv(exec_res, os.path.join(shared["out_dir"], "sweep.csv"))
        record_output(shared, "sweep.csv")
        print(f"Wrote {len(exec_res)} sweep rows.")


class WriteManifest(Node):
    def prep(self, shared):
        return RunManifest(
            command=shared["command"],
            argv=list(shared["argv"]),
            config=shared["config"],
            seeds={"root": shared["seed"]},
            inputs=shared["inputs"],
            outputs=sorted(shared["outputs"]),
            substitutes=dict(SUBSTITUTE_FLAGS),
        ), shared["out_dir"]

    def exec(self, prep_res):
        manifest, out_dir = prep_res
        return manifest.write(out_dir)

    def post(self, shared, prep_res, exec_res):
        shared["manifest_path"] = exec_res
        print(f"\nDone! Outputs and manifest are in: {shared['out_dir']}")
