"""EVM JSON-RPC wire backend for the anchoring ledger.

Talks plain HTTP JSON-RPC to a node hosting the on-chain log contract.
Call data is standard ABI: a 4-byte selector (leading bytes of Keccak-256
over the method signature, computed at import time rather than hardcoded)
followed by the 32-byte report hash.  Transport failures always surface as
:class:`LedgerUnavailableError`; contract reverts never do.
"""

from __future__ import annotations

import re
import time

import requests

from .keccak import event_topic, selector
from .ledger import (
    DUPLICATE_REASON,
    Ledger,
    LedgerTx,
    LedgerUnavailableError,
    LogEntry,
    SystemClock,
    TxStatus,
)
from .report import Digest

LOG_METHOD_SIG = "logVulnerabilityHash(bytes32)"
GET_METHOD_SIG = "getLog(bytes32)"
MINTED_EVENT_SIG = "LogMinted(bytes32,address)"

_LOG_SELECTOR = selector(LOG_METHOD_SIG)
_GET_SELECTOR = selector(GET_METHOD_SIG)
MINTED_TOPIC = event_topic(MINTED_EVENT_SIG)

# Error(string) selector used by solidity revert reasons
_ERROR_STRING_SELECTOR = selector("Error(string)")

_REVERT_MSG_RE = re.compile(r"revert(?:ed)?(?: with reason string)?[:\s]+'?([^']*)'?", re.IGNORECASE)


class ContractRevert(Exception):
    def __init__(self, reason: str, tx_hash: bytes | None = None):
        super().__init__(reason)
        self.reason = reason
        self.tx_hash = tx_hash


def decode_revert_reason(data_hex: str) -> str | None:
    """Decode an ABI-encoded Error(string) payload, if that is what it is."""
    raw = bytes.fromhex(data_hex.removeprefix("0x"))
    if len(raw) < 4 + 64 or raw[:4] != _ERROR_STRING_SELECTOR:
        return None
    str_len = int.from_bytes(raw[36:68], "big")
    return raw[68:68 + str_len].decode("utf-8", errors="replace")


def _hex_quantity(value: int) -> str:
    return hex(value)


def _addr(account: bytes) -> str:
    return "0x" + account.hex()


class RpcLedger(Ledger):
    """Anchoring ledger backed by an EVM node over HTTP JSON-RPC.

    ``submit_log`` returns once the node has accepted the transaction
    (mempool admission); ``settle_submission`` polls the receipt and settles
    the tx to Confirmed or Reverted.
    """

    def __init__(
        self,
        url: str,
        contract: str,
        auditor: bytes,
        chain_id: int | None = None,
        timeout_s: float = 10.0,
        receipt_poll_s: float = 0.05,
        receipt_timeout_s: float = 60.0,
    ):
        if len(auditor) != 20:
            raise ValueError("auditor must be a 20-byte account id")
        if not re.fullmatch(r"0x[0-9a-fA-F]{40}", contract):
            raise ValueError(f"contract must be a 0x-prefixed 20-byte address, got {contract!r}")
        self.url = url
        self.contract = contract
        self.auditor = auditor
        self.chain_id = chain_id
        self.timeout_s = timeout_s
        self.receipt_poll_s = receipt_poll_s
        self.receipt_timeout_s = receipt_timeout_s
        self._session = requests.Session()
        self._next_id = 1
        self._chain_checked = False

    # -- transport -----------------------------------------------------------

    def _rpc(self, method: str, params: list) -> object:
        request_id = self._next_id
        self._next_id += 1
        try:
            response = self._session.post(
                self.url,
                json={"jsonrpc": "2.0", "id": request_id, "method": method, "params": params},
                timeout=self.timeout_s,
            )
        except requests.RequestException as exc:
            raise LedgerUnavailableError(f"rpc transport failure: {exc}") from exc
        if response.status_code != 200:
            raise LedgerUnavailableError(f"rpc http {response.status_code}")
        try:
            body = response.json()
        except ValueError as exc:
            raise LedgerUnavailableError("rpc returned non-JSON body") from exc
        if "error" in body and body["error"]:
            self._raise_for_error(body["error"])
        if "result" not in body:
            raise LedgerUnavailableError(f"rpc response missing result: {body!r}")
        return body["result"]

    def _raise_for_error(self, error: dict) -> None:
        """Split node errors into contract reverts vs transport problems."""
        message = str(error.get("message", ""))
        data = error.get("data")
        reason = None
        tx_hash = None
        if isinstance(data, dict):
            if isinstance(data.get("reason"), str):
                reason = data["reason"]
            elif isinstance(data.get("result"), str):
                reason = decode_revert_reason(data["result"])
            if isinstance(data.get("hash"), str):
                tx_hash = bytes.fromhex(data["hash"].removeprefix("0x"))
        elif isinstance(data, str) and data.startswith("0x"):
            reason = decode_revert_reason(data)
        if reason is None:
            match = _REVERT_MSG_RE.search(message)
            if match:
                reason = match.group(1).strip()
        if reason is not None:
            raise ContractRevert(reason, tx_hash=tx_hash)
        raise LedgerUnavailableError(f"rpc error: {message}")

    def _ensure_chain(self) -> None:
        if self._chain_checked or self.chain_id is None:
            return
        actual = int(str(self._rpc("eth_chainId", [])), 16)
        if actual != self.chain_id:
            raise LedgerUnavailableError(
                f"connected chain id {actual} != configured {self.chain_id}"
            )
        self._chain_checked = True

    # -- ledger interface ----------------------------------------------------

    def now_ms(self) -> int:
        return SystemClock.now_ms()

    def submit_log(self, payload_hash: Digest, auditor: bytes | None = None) -> LedgerTx:
        self._ensure_chain()
        sender = auditor if auditor is not None else self.auditor
        if len(sender) != 20:
            raise ValueError("auditor must be a 20-byte account id")
        data = "0x" + (_LOG_SELECTOR + payload_hash.value).hex()
        submitted = self.now_ms()
        try:
            tx_hash_hex = self._rpc("eth_sendTransaction", [{
                "from": _addr(sender),
                "to": self.contract,
                "data": data,
                "gas": _hex_quantity(200_000),
            }])
        except ContractRevert as revert:
            # instamining nodes report the revert at submission time
            tx = LedgerTx(
                tx_id=revert.tx_hash or bytes(32),
                payload_hash=payload_hash,
                auditor=sender,
                submitted_at_ms=submitted,
                status=TxStatus.REVERTED,
                revert_reason=revert.reason,
            )
            return tx
        tx = LedgerTx(
            tx_id=bytes.fromhex(str(tx_hash_hex).removeprefix("0x")),
            payload_hash=payload_hash,
            auditor=sender,
            submitted_at_ms=submitted,
            propagated_at_ms=self.now_ms(),
            status=TxStatus.PROPAGATED,
        )
        return tx

    def settle_submission(self, tx: LedgerTx) -> LedgerTx:
        if tx.status in (TxStatus.REVERTED, TxStatus.CONFIRMED):
            return tx
        receipt = self._wait_receipt(tx.tx_id)
        status = int(str(receipt.get("status", "0x0")), 16)
        if status == 1:
            tx.status = TxStatus.CONFIRMED
            tx.confirmed_at_ms = self.now_ms()
        else:
            tx.status = TxStatus.REVERTED
            tx.revert_reason = self._replay_revert_reason(tx, receipt)
        return tx

    def _wait_receipt(self, tx_id: bytes) -> dict:
        deadline = time.monotonic() + self.receipt_timeout_s
        while True:
            receipt = self._rpc("eth_getTransactionReceipt", ["0x" + tx_id.hex()])
            if isinstance(receipt, dict):
                return receipt
            if time.monotonic() > deadline:
                raise LedgerUnavailableError("timed out waiting for transaction receipt")
            time.sleep(self.receipt_poll_s)

    def _replay_revert_reason(self, tx: LedgerTx, receipt: dict) -> str:
        """Re-run the call at the failing block to recover the revert string."""
        try:
            self._rpc("eth_call", [{
                "from": _addr(tx.auditor),
                "to": self.contract,
                "data": "0x" + (_LOG_SELECTOR + tx.payload_hash.value).hex(),
            }, receipt.get("blockNumber", "latest")])
        except ContractRevert as revert:
            return revert.reason
        except LedgerUnavailableError:
            pass
        # write-once storage means a reverted logging tx can only be a duplicate
        if self.get_log(tx.payload_hash) is not None:
            return DUPLICATE_REASON
        return "execution reverted"

    def get_log(self, payload_hash: Digest) -> LogEntry | None:
        self._ensure_chain()
        data = "0x" + (_GET_SELECTOR + payload_hash.value).hex()
        result = self._rpc("eth_call", [{"to": self.contract, "data": data}, "latest"])
        raw = bytes.fromhex(str(result).removeprefix("0x"))
        if len(raw) < 128:
            raise LedgerUnavailableError(
                f"unexpected getLog return payload of {len(raw)} bytes"
            )
        report_hash = raw[0:32]
        timestamp = int.from_bytes(raw[32:64], "big")
        auditor = raw[76:96]
        verified = int.from_bytes(raw[96:128], "big") != 0
        if timestamp == 0:
            return None
        return LogEntry(
            report_hash=Digest(report_hash),
            timestamp=timestamp,
            auditor=auditor,
            verified=verified,
        )

    # -- deployment helper (dev nodes) ----------------------------------------

    def minted_event_count(self) -> int:
        """Number of LogMinted events emitted by the contract so far."""
        self._ensure_chain()
        logs = self._rpc("eth_getLogs", [{
            "address": self.contract,
            "topics": ["0x" + MINTED_TOPIC.hex()],
            "fromBlock": "0x0",
            "toBlock": "latest",
        }])
        if not isinstance(logs, list):
            raise LedgerUnavailableError("unexpected eth_getLogs response")
        return len(logs)


def deploy_contract(
    url: str,
    sender: bytes,
    bytecode_hex: str,
    timeout_s: float = 30.0,
) -> str:
    """Deploy contract bytecode from an unlocked dev-node account; returns the
    contract address."""
    probe = RpcLedger(url=url, contract="0x" + "00" * 20, auditor=sender)
    tx_hash = probe._rpc("eth_sendTransaction", [{
        "from": _addr(sender),
        "data": "0x" + bytecode_hex.removeprefix("0x"),
        "gas": _hex_quantity(2_000_000),
    }])
    deadline = time.monotonic() + timeout_s
    while True:
        receipt = probe._rpc("eth_getTransactionReceipt", [tx_hash])
        if isinstance(receipt, dict):
            address = receipt.get("contractAddress")
            if not address:
                raise LedgerUnavailableError("deployment receipt has no contract address")
            return address
        if time.monotonic() > deadline:
            raise LedgerUnavailableError("timed out waiting for deployment receipt")
        time.sleep(0.05)
