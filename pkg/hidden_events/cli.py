# MIT License

# Copyright (c) 2024 hidden-events developers

# Command line
# ..................................................................................................................
# ..................................................................................................................

"""

hidden-events <simulate|fit|bins|predict|backtest|chainladder> --config <path> [--seed N] [--threads K] [--out DIR]

Exit codes: 0 success, 1 unexpected error, 2 configuration error, 3 data error,
4 fit did not converge or the model is not identifiable.

"""

import argparse
import os
import sys
from typing import Dict, List, Optional

from .binning import hazard_table, propose_bins
from .calendars import to_index
from .chainladder import aggregate, chain_ladder_report
from .config import SCHEMA_VERSION, RunConfig
from .counts import triangle_from_events
from .datasets import parse_events_csv, write_events_csv
from .errors import ConfigError, HiddenEventsError
from .likelihood import FitResult, confidence_intervals, fit
from .prediction import backtest, predict_cells
from .simulate import simulate_scenario
from .utils import write_json
from .wrappers import scenario_study

COMMANDS = ("simulate", "fit", "bins", "predict", "backtest", "chainladder")

EXIT_OK = 0
EXIT_NOT_CONVERGED = 4


class Run:

    """

    One command invocation: configuration, seed, worker count and output directory.

    """

    def __init__(self, command: str, config: RunConfig, seed: Optional[int], threads: int, out: str):
        self.command = command
        self.config = config
        self.seed = config.seed(seed)
        self.threads = threads
        self.out = out
        self.hash = config.hash(self.seed)

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def stamp(self, report: Dict) -> Dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config_hash": self.hash,
            "seed": self.seed,
            **report,
        }

    def write_json(self, name: str, report: Dict):
        write_json(self.stamp(report), self.path(name))
        print("Wrote %s" % self.path(name))

    def write_csv(self, name: str, frame, index: bool = False):
        frame.to_csv(self.path(name), index=index, lineterminator="\n")
        print("Wrote %s (%s rows)" % (self.path(name), len(frame)))

    # shared steps

    def events(self):
        path = self.config.path("data", "events")
        if path is None:
            raise ConfigError("[data] events is required")
        return parse_events_csv(path, self.config.origin)

    def triangle(self, events):
        _, computation, _ = self.config.prediction_dates()
        return triangle_from_events(events, computation)

    def bins(self, triangle):
        bins = self.config.delay_bins()
        if bins is None:
            bins = propose_bins(hazard_table(triangle), self.config.binning_options())
        return bins

    def fit(self, triangle, cal) -> FitResult:
        spec = self.config.covariate_spec(self.bins(triangle))
        return fit(
            triangle,
            spec,
            self.config.distribution(),
            cal,
            opts=self.config.fit_options(),
            truncation=self.config.truncation(),
        )

    def fit_status(self, result: FitResult) -> int:
        if result.converged:
            return EXIT_OK
        print("Fit did not converge: %s" % result.message, file=sys.stderr)
        return EXIT_NOT_CONVERGED

    # commands

    def simulate(self) -> int:
        cfg = self.config.scenario(self.seed)
        dataset = simulate_scenario(cfg, n_jobs=self.threads)
        write_events_csv(dataset.events, self.path("events.csv"))
        print("Wrote %s (%s events)" % (self.path("events.csv"), len(dataset.events)))
        self.write_json(
            "events.json",
            {"scenario": cfg.to_dict(), "n_events": len(dataset.events), "n_days": len(dataset.occurrences)},
        )
        return EXIT_OK

    def bins_command(self) -> int:
        triangle = self.triangle(self.events())
        table = hazard_table(triangle)
        bins = propose_bins(table, self.config.binning_options())
        self.write_csv("hazard_table.csv", table.to_frame())
        self.write_json(
            "bins.json",
            {"starts": list(bins.starts), "labels": bins.labels(), "n_events": table.n_events},
        )
        return EXIT_OK

    def fit_command(self) -> int:
        triangle = self.triangle(self.events())
        result = self.fit(triangle, self.config.calendar())
        self.write_json("fit.json", result.to_dict())
        self.write_csv("intervals.csv", confidence_intervals(result, self.config.level()))
        return self.fit_status(result)

    def predict(self) -> int:
        events = self.events()
        cal = self.config.calendar()
        eval_date, computation, horizon = self.config.prediction_dates()
        triangle = triangle_from_events(events, computation)
        result = self.fit(triangle, cal)
        report = predict_cells(
            triangle, result, eval_date, computation, horizon, cal, **self.config.prediction_options()
        )
        self.write_csv("predictions_daily.csv", report.by_future_date.rename("expected").reset_index())
        monthly = report.by_future_month.rename("expected")
        monthly.index = monthly.index.astype(str).rename("observation_month")
        self.write_csv("predictions_monthly.csv", monthly.reset_index())
        self.write_json("prediction.json", {**report.to_dict(), "fit": result.to_dict()})
        return self.fit_status(result)

    def backtest_command(self) -> int:
        if self.config.has("scenario"):
            cfg = self.config.scenario(self.seed)
            options = self.config.scenario_study_options()
            gap = self.config.backtest_options()["gap"]
            frame, summary = scenario_study(
                cfg,
                options["replications"],
                options["eval_dates"],
                options["models"],
                gap=gap,
                opts=self.config.fit_options(),
                n_jobs=self.threads,
            )
            self.write_csv("scenario_study.csv", frame)
            self.write_csv("scenario_summary.csv", summary)
            self.write_json("summary.json", {"scenario": cfg.to_dict(), "table": summary.to_dict("records")})
            return EXIT_OK

        events = self.events()
        cal = self.config.calendar()
        options = self.config.backtest_options()
        eval_dates = [to_index(d, events.origin) for d in self.config.backtest_dates()]
        first = triangle_from_events(events, min(eval_dates) + options["gap"])
        spec = self.config.covariate_spec(self.bins(first))
        result = backtest(
            events,
            eval_dates,
            spec,
            self.config.distribution(),
            cal,
            options["gap"],
            options["horizon"],
            options["refit_every"],
            self.config.fit_options(),
            n_jobs=self.threads,
        )
        self.write_csv("backtest.csv", result.frame)
        self.write_json("summary.json", result.summary())
        return EXIT_OK

    def chainladder(self) -> int:
        events = self.events()
        options = self.config.chainladder_options()
        if options["eval_date"] is None:
            raise ConfigError("[chainladder] eval_date is required")
        tri = aggregate(
            events, to_index(options["eval_date"], events.origin), options["period_length"], options["anchor"]
        )
        self.write_csv("triangle.csv", tri.to_frame(), index=True)
        self.write_json("chainladder.json", chain_ladder_report(tri))
        return EXIT_OK

    def __call__(self) -> int:
        os.makedirs(self.out, exist_ok=True)
        handler = {
            "simulate": self.simulate,
            "fit": self.fit_command,
            "bins": self.bins_command,
            "predict": self.predict,
            "backtest": self.backtest_command,
            "chainladder": self.chainladder,
        }[self.command]
        return handler()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hidden-events",
        description="Predict the number of events that occurred but are not yet observed.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="INI run configuration")
    parser.add_argument("--seed", type=int, default=None, help="random seed (overrides [scenario] seed)")
    parser.add_argument("--threads", type=int, default=1, help="maximum number of parallel workers")
    parser.add_argument("--out", default=None, help="output directory (overrides [output] directory)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        config = RunConfig.from_file(args.config)
        config.require(args.command)
        run = Run(args.command, config, args.seed, args.threads, config.output_dir(args.out))
        return run()
    except HiddenEventsError as err:
        print("%s: %s" % (type(err).__name__, err), file=sys.stderr)
        return err.exit_code
    except ValueError as err:
        # dates or options the data cannot honour
        print("ConfigError: %s" % err, file=sys.stderr)
        return ConfigError.exit_code
    except Exception as err:
        print("unexpected error: %r" % err, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
