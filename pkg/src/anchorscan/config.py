"""Operator configuration for the command-line tools.

One JSON config file, environment-variable overrides (``ANCHORSCAN_*``),
then command-line flags — later layers win.  Exactly one ledger backend is
active at a time: the deterministic simulated chain (state persisted inside
the store directory) or a real EVM endpoint over JSON-RPC.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path

from .ledger import ChainConfig, LatencyDist

DEFAULT_AUDITOR_HEX = "a0dec0de" + "00" * 14 + "0001"  # fixed dev account id
DEFAULT_REPORT_EPOCH_S = 1_700_000_000


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CliConfig:
    store: Path = Path("store")
    backend: str = "sim"  # "sim" | "rpc"
    chain: ChainConfig = ChainConfig()
    rpc_url: str | None = None
    rpc_chain_id: int | None = None
    rpc_contract: str | None = None
    ruleset_path: Path | None = None  # None → packaged default rules
    auditor_hex: str = DEFAULT_AUDITOR_HEX
    report_epoch_s: int = DEFAULT_REPORT_EPOCH_S

    def __post_init__(self) -> None:
        if self.backend not in ("sim", "rpc"):
            raise ConfigError(f"backend must be 'sim' or 'rpc', got {self.backend!r}")
        try:
            raw = bytes.fromhex(self.auditor_hex.removeprefix("0x"))
        except ValueError as exc:
            raise ConfigError(f"auditor must be hex: {exc}") from exc
        if len(raw) != 20:
            raise ConfigError("auditor must encode exactly 20 bytes")
        if self.backend == "rpc" and not self.rpc_url:
            raise ConfigError("rpc backend requires rpc_url")
        if self.backend == "rpc" and not self.rpc_contract:
            raise ConfigError("rpc backend requires rpc_contract address")

    @property
    def auditor(self) -> bytes:
        return bytes.fromhex(self.auditor_hex.removeprefix("0x"))


def _chain_from_dict(obj: dict) -> ChainConfig:
    kwargs: dict = {}
    for dist_name in ("propagation", "confirmation"):
        if dist_name in obj:
            d = obj[dist_name]
            kwargs[dist_name] = LatencyDist(float(d["mean_ms"]), float(d["std_ms"]))
    for int_name in ("block_interval_ms", "confirmations_required", "rng_seed", "genesis_unix_s"):
        if int_name in obj:
            kwargs[int_name] = int(obj[int_name])
    return ChainConfig(**kwargs)


def config_from_dict(obj: dict) -> CliConfig:
    try:
        kwargs: dict = {}
        if "store" in obj:
            kwargs["store"] = Path(obj["store"])
        if "backend" in obj:
            kwargs["backend"] = str(obj["backend"])
        if "chain" in obj:
            kwargs["chain"] = _chain_from_dict(obj["chain"])
        if "rpc" in obj:
            rpc = obj["rpc"]
            kwargs["rpc_url"] = rpc.get("url")
            if "chain_id" in rpc:
                kwargs["rpc_chain_id"] = int(rpc["chain_id"])
            kwargs["rpc_contract"] = rpc.get("contract")
        if "ruleset" in obj:
            kwargs["ruleset_path"] = Path(obj["ruleset"])
        if "auditor" in obj:
            kwargs["auditor_hex"] = str(obj["auditor"])
        if "report_epoch_s" in obj:
            kwargs["report_epoch_s"] = int(obj["report_epoch_s"])
        return CliConfig(**kwargs)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc


_ENV_KEYS = {
    "ANCHORSCAN_STORE": "store",
    "ANCHORSCAN_BACKEND": "backend",
    "ANCHORSCAN_RPC_URL": "rpc_url",
    "ANCHORSCAN_RPC_CHAIN_ID": "rpc_chain_id",
    "ANCHORSCAN_RPC_CONTRACT": "rpc_contract",
    "ANCHORSCAN_RULESET": "ruleset_path",
    "ANCHORSCAN_AUDITOR": "auditor_hex",
}


def load_config(
    path: str | Path | None = None,
    env: dict[str, str] | None = None,
    **overrides: object,
) -> CliConfig:
    """Build the effective config: file, then env, then explicit overrides.

    ``overrides`` with value None are ignored, so flag plumbing can pass
    everything through unconditionally.
    """
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            with open(p, encoding="utf-8") as fh:
                cfg = config_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    else:
        cfg = CliConfig()

    env = os.environ if env is None else env
    env_kwargs: dict = {}
    for env_key, field_name in _ENV_KEYS.items():
        if env_key in env:
            value: object = env[env_key]
            if field_name in ("store", "ruleset_path"):
                value = Path(str(value))
            if field_name == "rpc_chain_id":
                value = int(str(value))
            env_kwargs[field_name] = value
    if env_kwargs:
        cfg = replace(cfg, **env_kwargs)

    clean = {k: v for k, v in overrides.items() if v is not None}
    if "store" in clean:
        clean["store"] = Path(str(clean["store"]))
    if "ruleset_path" in clean:
        clean["ruleset_path"] = Path(str(clean["ruleset_path"]))
    if clean:
        cfg = replace(cfg, **clean)

    if cfg.ruleset_path is not None and not cfg.ruleset_path.exists():
        raise ConfigError(f"ruleset file not found: {cfg.ruleset_path}")
    return cfg
