"""Simulated blockchain: wallets, flat fees, NFT mints with provenance,
token deployment, fixed-price sales, and full-ledger verification.

Money is 9-decimal fixed point carried as integer nano-units; floats never
touch balances, so conservation is exact: at every ledger prefix,
sum(balances) + fees collected == sum(endowments). Operations validate
everything up front and only then mutate, so a failed call leaves the
ledger byte-identical.

The ledger persists in the same dense-offset line format as the event log
(`offset<TAB>kind<TAB>timestamp<TAB>json payload`) and rebuilds itself by
replaying those entries.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Callable, Sequence

import numpy as np

from .clock import SimClock
from .errors import (
    BadSymbolError,
    CorruptLogError,
    DuplicateArtError,
    InsufficientFundsError,
    IoFailureError,
    NotOwnerError,
    SymbolTakenError,
)

NANO = 10**9
GENESIS = "genesis"
FEE_SINK = "fees"
ENTRY_KINDS = ("transfer", "mint", "deploy", "sale", "fee")


def to_nanos(amount) -> int:
    """Parse a decimal amount into integer nano-units, exactly."""
    if isinstance(amount, int):
        return amount * NANO
    try:
        scaled = Decimal(str(amount)) * NANO
    except InvalidOperation as exc:
        raise ValueError(f"amount {amount!r} is not a decimal") from exc
    nanos = int(scaled)
    if nanos != scaled:
        raise ValueError(f"amount {amount!r} is not representable in 9 decimals")
    return nanos


def format_nanos(nanos: int) -> str:
    sign = "-" if nanos < 0 else ""
    units, frac = divmod(abs(nanos), NANO)
    return f"{sign}{units}.{frac:09d}"


@dataclass(frozen=True)
class Wallet:
    address: str


@dataclass(frozen=True)
class LedgerEntry:
    sequence: int
    kind: str
    src: str
    dst: str
    amount: int
    timestamp: int
    payload: dict
    payload_hash: str


@dataclass(frozen=True)
class MintRecord:
    token_id: int
    creator: str
    art_hash: str
    timestamp: int


@dataclass(frozen=True)
class TokenRecord:
    name: str
    symbol: str
    total_supply: int
    deployer: str


@dataclass(frozen=True)
class ChainFees:
    mint: int = to_nanos("0.01")
    deploy: int = to_nanos("0.02")


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    violations: tuple[str, ...] = ()


def wallet_address(seed: int) -> str:
    digest = hashlib.blake2b(seed.to_bytes(8, "little", signed=False), digest_size=8)
    return "w" + digest.hexdigest()


def _entry_hash(kind: str, src: str, dst: str, amount: int, payload: dict) -> str:
    """Content hash over the whole entry body; catches any field tamper."""
    body = {"kind": kind, "src": src, "dst": dst, "amount": amount, "payload": payload}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode("utf-8")).hexdigest()


def _valid_symbol(symbol: str) -> bool:
    return 1 <= len(symbol) <= 10 and all("A" <= ch <= "Z" for ch in symbol)


class Ledger:
    """Single-writer ledger; committed entries are immutable."""

    def __init__(self, fees: ChainFees = ChainFees(), clock: Callable[[], int] | None = None):
        self.fees = fees
        self._clock = clock or SimClock()
        self._entries: list[LedgerEntry] = []
        self._balances: dict[str, int] = {}
        self._endowed = 0
        self._fees_collected = 0
        self._mints: list[MintRecord] = []
        self._art_index: dict[str, int] = {}
        self._nft_owner: dict[int, str] = {}
        self._tokens: dict[str, TokenRecord] = {}
        self._token_balances: dict[str, dict[str, int]] = {}
        self._lock = threading.RLock()

    # --- views -------------------------------------------------------------

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        return tuple(self._entries)

    def balance(self, address: str) -> int:
        return self._balances.get(address, 0)

    def fees_collected(self) -> int:
        return self._fees_collected

    def nft_owner(self, token_id: int) -> str | None:
        return self._nft_owner.get(token_id)

    def token(self, symbol: str) -> TokenRecord | None:
        return self._tokens.get(symbol)

    def token_balance(self, symbol: str, address: str) -> int:
        return self._token_balances.get(symbol, {}).get(address, 0)

    def mints(self) -> tuple[MintRecord, ...]:
        return tuple(self._mints)

    # --- operations -----------------------------------------------------------

    def _append(self, kind: str, src: str, dst: str, amount: int, payload: dict) -> LedgerEntry:
        entry = LedgerEntry(
            sequence=len(self._entries),
            kind=kind,
            src=src,
            dst=dst,
            amount=amount,
            timestamp=self._clock(),
            payload=payload,
            payload_hash=_entry_hash(kind, src, dst, amount, payload),
        )
        self._entries.append(entry)
        return entry

    def create_wallet(self, seed: int, endowment: int = 0) -> Wallet:
        """Derive a stable address from the seed and endow it from genesis."""
        if endowment < 0:
            raise ValueError("endowment must be non-negative")
        address = wallet_address(seed)
        with self._lock:
            if address not in self._balances:
                self._balances[address] = 0
            if endowment > 0:
                self._append("transfer", GENESIS, address, endowment, {"endowment": True})
                self._balances[address] += endowment
                self._endowed += endowment
        return Wallet(address=address)

    def transfer(self, src: str, dst: str, amount: int) -> LedgerEntry:
        if amount < 0:
            raise ValueError("amount must be non-negative")
        with self._lock:
            if self.balance(src) < amount:
                raise InsufficientFundsError(
                    f"{src} holds {format_nanos(self.balance(src))}, "
                    f"needs {format_nanos(amount)}"
                )
            entry = self._append("transfer", src, dst, amount, {})
            self._balances[src] -= amount
            self._balances[dst] = self.balance(dst) + amount
        return entry

    def mint_nft(self, wallet: Wallet | str, art: bytes, fee: int | None = None) -> MintRecord:
        """Mint art bytes as an NFT; duplicate art is rejected by content hash."""
        address = wallet.address if isinstance(wallet, Wallet) else wallet
        fee = self.fees.mint if fee is None else fee
        art_hash = hashlib.sha256(art).hexdigest()
        with self._lock:
            if self.balance(address) < fee:
                raise InsufficientFundsError(
                    f"{address} holds {format_nanos(self.balance(address))}, "
                    f"mint fee is {format_nanos(fee)}"
                )
            if art_hash in self._art_index:
                raise DuplicateArtError(f"art {art_hash[:16]} already minted "
                                        f"as token {self._art_index[art_hash]}")
            token_id = len(self._mints)
            mint_entry = self._append(
                "mint", address, address, 0,
                {"token_id": token_id, "art_hash": art_hash},
            )
            self._append("fee", address, FEE_SINK, fee, {"for": "mint", "token_id": token_id})
            self._balances[address] -= fee
            self._fees_collected += fee
            record = MintRecord(
                token_id=token_id, creator=address, art_hash=art_hash,
                timestamp=mint_entry.timestamp,
            )
            self._mints.append(record)
            self._art_index[art_hash] = token_id
            self._nft_owner[token_id] = address
        return record

    def deploy_token(
        self,
        wallet: Wallet | str,
        name: str,
        symbol: str,
        total_supply: int,
        fee: int | None = None,
    ) -> TokenRecord:
        address = wallet.address if isinstance(wallet, Wallet) else wallet
        fee = self.fees.deploy if fee is None else fee
        if not _valid_symbol(symbol):
            raise BadSymbolError(f"symbol {symbol!r} must be 1-10 uppercase ASCII letters")
        if total_supply < 1:
            raise ValueError("total_supply must be positive")
        with self._lock:
            if symbol in self._tokens:
                raise SymbolTakenError(f"symbol {symbol} already deployed")
            if self.balance(address) < fee:
                raise InsufficientFundsError(
                    f"{address} holds {format_nanos(self.balance(address))}, "
                    f"deploy fee is {format_nanos(fee)}"
                )
            self._append(
                "deploy", address, address, 0,
                {"name": name, "symbol": symbol, "total_supply": total_supply},
            )
            self._append("fee", address, FEE_SINK, fee, {"for": "deploy", "symbol": symbol})
            self._balances[address] -= fee
            self._fees_collected += fee
            record = TokenRecord(
                name=name, symbol=symbol, total_supply=total_supply, deployer=address
            )
            self._tokens[symbol] = record
            self._token_balances[symbol] = {address: total_supply}
        return record

    def execute_sale(self, asset, seller: str, buyer: str, price: int) -> LedgerEntry:
        """Sell an NFT (asset=token_id) or token units (asset=(symbol, units)).

        Balances move buyer -> seller; ownership moves seller -> buyer. A
        self-sale nets to zero but is still recorded.
        """
        if price < 0:
            raise ValueError("price must be non-negative")
        with self._lock:
            if isinstance(asset, int):
                owner = self._nft_owner.get(asset)
                if owner is None or owner != seller:
                    raise NotOwnerError(f"{seller} does not own NFT {asset}")
                payload = {"nft": asset, "price": price}
            else:
                symbol, units = asset
                if units < 1:
                    raise ValueError("units must be positive")
                if self.token_balance(symbol, seller) < units:
                    raise NotOwnerError(
                        f"{seller} holds {self.token_balance(symbol, seller)} {symbol}, "
                        f"sale needs {units}"
                    )
                payload = {"token": symbol, "units": units, "price": price}
            if self.balance(buyer) < price:
                raise InsufficientFundsError(
                    f"buyer {buyer} holds {format_nanos(self.balance(buyer))}, "
                    f"price is {format_nanos(price)}"
                )

            entry = self._append("sale", buyer, seller, price, payload)
            self._balances[buyer] -= price
            self._balances[seller] = self.balance(seller) + price
            if isinstance(asset, int):
                self._nft_owner[asset] = buyer
            else:
                symbol, units = asset
                holdings = self._token_balances[symbol]
                holdings[seller] -= units
                holdings[buyer] = holdings.get(buyer, 0) + units
        return entry

    # --- verification ------------------------------------------------------------

    def verify(self) -> VerifyReport:
        return verify_entries(self._entries)

    # --- persistence ---------------------------------------------------------------

    def serialize(self) -> str:
        lines = []
        for e in self._entries:
            body = {
                "src": e.src, "dst": e.dst, "amount": e.amount,
                "payload": e.payload, "payload_hash": e.payload_hash,
            }
            lines.append(f"{e.sequence}\t{e.kind}\t{e.timestamp}\t{json.dumps(body, sort_keys=True)}")
        return "".join(line + "\n" for line in lines)

    def save(self, path) -> None:
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(self.serialize())
        except OSError as exc:
            raise IoFailureError(f"cannot write ledger {path}: {exc}") from exc

    @classmethod
    def load(cls, path, fees: ChainFees = ChainFees()) -> "Ledger":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise IoFailureError(f"cannot read ledger {path}: {exc}") from exc
        entries = []
        for expected, line in enumerate(lines):
            parts = line.split("\t", 3)
            if len(parts) != 4:
                raise CorruptLogError(f"{path}: malformed ledger line {expected}")
            try:
                sequence, kind, timestamp = int(parts[0]), parts[1], int(parts[2])
                body = json.loads(parts[3])
                entry = LedgerEntry(
                    sequence=sequence, kind=kind, src=body["src"], dst=body["dst"],
                    amount=int(body["amount"]), timestamp=timestamp,
                    payload=body["payload"], payload_hash=body["payload_hash"],
                )
            except (ValueError, KeyError) as exc:
                raise CorruptLogError(f"{path}: bad ledger line {expected}: {exc}") from exc
            if entry.sequence != expected:
                raise CorruptLogError(
                    f"{path}: sequence gap, expected {expected} found {entry.sequence}"
                )
            entries.append(entry)
        ledger = cls(fees=fees)
        ledger._apply_entries(entries)
        return ledger

    def _apply_entries(self, entries: Sequence[LedgerEntry]) -> None:
        """Rebuild all state by replaying entries (no validation beyond verify)."""
        report = verify_entries(entries)
        if not report.ok:
            raise CorruptLogError("ledger entries fail verification: "
                                  + "; ".join(report.violations))
        self._entries = list(entries)
        for e in entries:
            if e.kind == "transfer":
                if e.src == GENESIS:
                    self._endowed += e.amount
                else:
                    self._balances[e.src] = self.balance(e.src) - e.amount
                self._balances[e.dst] = self.balance(e.dst) + e.amount
            elif e.kind == "fee":
                self._balances[e.src] = self.balance(e.src) - e.amount
                self._fees_collected += e.amount
            elif e.kind == "mint":
                token_id = e.payload["token_id"]
                record = MintRecord(
                    token_id=token_id, creator=e.src,
                    art_hash=e.payload["art_hash"], timestamp=e.timestamp,
                )
                self._mints.append(record)
                self._art_index[record.art_hash] = token_id
                self._nft_owner[token_id] = e.src
            elif e.kind == "deploy":
                record = TokenRecord(
                    name=e.payload["name"], symbol=e.payload["symbol"],
                    total_supply=int(e.payload["total_supply"]), deployer=e.src,
                )
                self._tokens[record.symbol] = record
                self._token_balances[record.symbol] = {e.src: record.total_supply}
            elif e.kind == "sale":
                self._balances[e.src] = self.balance(e.src) - e.amount
                self._balances[e.dst] = self.balance(e.dst) + e.amount
                if "nft" in e.payload:
                    self._nft_owner[e.payload["nft"]] = e.src
                else:
                    symbol, units = e.payload["token"], int(e.payload["units"])
                    holdings = self._token_balances[symbol]
                    holdings[e.dst] -= units
                    holdings[e.src] = holdings.get(e.src, 0) + units


def verify_entries(entries: Sequence[LedgerEntry]) -> VerifyReport:
    """Check sequencing, prefix-wise balances and conservation, provenance.

    Violations are reported (never raised) and name the first failing
    sequence number per category.
    """
    violations: list[str] = []
    balances: dict[str, int] = {}
    endowed = 0
    fees = 0
    art_seen: dict[str, int] = {}
    next_token_id = 0
    supplies: dict[str, int] = {}
    holdings: dict[str, dict[str, int]] = {}
    symbols_seen: set[str] = set()
    nft_owner: dict[int, str] = {}

    def fail(seq: int, message: str) -> None:
        violations.append(f"seq {seq}: {message}")

    for expected, e in enumerate(entries):
        if e.sequence != expected:
            fail(expected, f"sequence not dense, found {e.sequence}")
            break
        if e.kind not in ENTRY_KINDS:
            fail(e.sequence, f"unknown kind {e.kind!r}")
            continue
        if e.amount < 0:
            fail(e.sequence, f"negative amount {e.amount}")
            continue
        if _entry_hash(e.kind, e.src, e.dst, e.amount, e.payload) != e.payload_hash:
            fail(e.sequence, "entry content hash mismatch")

        if e.kind == "transfer":
            if e.src == GENESIS:
                endowed += e.amount
            else:
                balances[e.src] = balances.get(e.src, 0) - e.amount
            balances[e.dst] = balances.get(e.dst, 0) + e.amount
        elif e.kind == "fee":
            if e.dst != FEE_SINK:
                fail(e.sequence, f"fee routed to {e.dst!r}, not the fee sink")
            balances[e.src] = balances.get(e.src, 0) - e.amount
            fees += e.amount
        elif e.kind == "sale":
            balances[e.src] = balances.get(e.src, 0) - e.amount
            balances[e.dst] = balances.get(e.dst, 0) + e.amount
            if "token" in e.payload:
                symbol, units = e.payload["token"], int(e.payload["units"])
                h = holdings.setdefault(symbol, {})
                h[e.dst] = h.get(e.dst, 0) - units
                h[e.src] = h.get(e.src, 0) + units
                if h[e.dst] < 0:
                    fail(e.sequence, f"seller overdraws {symbol} units")
            else:
                nft = e.payload.get("nft")
                if nft_owner.get(nft) != e.dst:
                    fail(e.sequence, f"NFT {nft} sold by non-owner {e.dst}")
                nft_owner[nft] = e.src
        elif e.kind == "mint":
            art_hash = e.payload.get("art_hash")
            token_id = e.payload.get("token_id")
            if art_hash in art_seen:
                fail(e.sequence, f"duplicate art hash {str(art_hash)[:16]} "
                                 f"(first minted seq for token {art_seen[art_hash]})")
            else:
                art_seen[art_hash] = token_id
            if token_id != next_token_id:
                fail(e.sequence, f"token id not dense, expected {next_token_id} got {token_id}")
            next_token_id = (token_id + 1) if isinstance(token_id, int) else next_token_id
            nft_owner[token_id] = e.src
        elif e.kind == "deploy":
            symbol = e.payload.get("symbol")
            if symbol in symbols_seen:
                fail(e.sequence, f"symbol {symbol} deployed twice")
            symbols_seen.add(symbol)
            supply = int(e.payload.get("total_supply", 0))
            supplies[symbol] = supply
            holdings.setdefault(symbol, {})[e.src] = supply

        negative = [a for a, b in balances.items() if b < 0]
        if negative:
            fail(e.sequence, f"negative balance for {sorted(negative)[0]}")
            break
        if sum(balances.values()) + fees != endowed:
            fail(e.sequence, "conservation violated: balances + fees != endowments")
            break

    for symbol, supply in supplies.items():
        circulating = sum(holdings.get(symbol, {}).values())
        if circulating != supply:
            violations.append(f"token {symbol}: circulating {circulating} != supply {supply}")

    return VerifyReport(ok=not violations, violations=tuple(violations))


def implied_market_cap(total_supply: int, price_nanos_per_unit: int) -> int:
    """supply * unit price, in nano-units. Pure arithmetic, nothing more."""
    return total_supply * price_nanos_per_unit


# --- procedural art -----------------------------------------------------------------


def generate_art(seed: int, theme: str, width: int = 64, height: int = 64) -> bytes:
    """Deterministic plasma-style image as binary PPM (P6) bytes."""
    digest = hashlib.blake2b(
        theme.encode("utf-8"), digest_size=8, key=(seed % 2**64).to_bytes(8, "little")
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    xs = xs / width
    ys = ys / height
    channels = []
    for _ in range(3):
        field = np.zeros((height, width))
        for _ in range(4):
            fx, fy = rng.uniform(1.0, 7.0, size=2)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            field += rng.uniform(0.4, 1.0) * np.sin(
                2.0 * math.pi * (fx * xs + fy * ys) + phase
            )
        lo, hi = field.min(), field.max()
        span = (hi - lo) or 1.0
        channels.append(((field - lo) / span * 255.0).astype(np.uint8))
    pixels = np.stack(channels, axis=-1)
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    return header + pixels.tobytes()


def parse_ppm_size(art: bytes) -> tuple[int, int]:
    """Width and height from a P6 header; raises on malformed art."""
    if not art.startswith(b"P6\n"):
        raise ValueError("not a binary PPM")
    head = art.split(b"\n", 3)
    width, height = head[1].split(b" ")
    return int(width), int(height)


# --- agent-facing client --------------------------------------------------------------


class AgentChainClient:
    """The agent's handle on the chain: one wallet, themed art, derived symbols."""

    def __init__(
        self,
        ledger: Ledger,
        wallet: Wallet,
        art_size: tuple[int, int] = (32, 32),
        art_sink: Callable[[str, bytes], None] | None = None,
    ):
        self.ledger = ledger
        self.wallet = wallet
        self.art_size = art_size
        self._art_sink = art_sink

    def _art(self, seed: int, theme: str) -> tuple[str, bytes]:
        art = generate_art(seed, theme, *self.art_size)
        art_hash = hashlib.sha256(art).hexdigest()
        if self._art_sink is not None:
            self._art_sink(art_hash, art)
        return art_hash, art

    def generate_image(self, seed: int, theme: str) -> str:
        art_hash, _ = self._art(seed, theme)
        return art_hash

    def mint(self, seed: int, theme: str) -> MintRecord:
        _, art = self._art(seed, theme)
        return self.ledger.mint_nft(self.wallet, art)

    def deploy(self, seed: int, theme: str) -> TokenRecord:
        letters = [ch for ch in theme.upper() if "A" <= ch <= "Z"][:4] or ["Z"]
        suffix = format(seed % 26**3, "06d")[:3]
        symbol = ("".join(letters) + "".join(
            chr(ord("A") + int(d)) for d in suffix
        ))[:10]
        return self.ledger.deploy_token(
            self.wallet, name=f"{theme} token", symbol=symbol, total_supply=10**9
        )


__all__ = [
    "NANO", "GENESIS", "FEE_SINK", "to_nanos", "format_nanos",
    "Wallet", "LedgerEntry", "MintRecord", "TokenRecord", "ChainFees",
    "VerifyReport", "Ledger", "verify_entries", "implied_market_cap",
    "generate_art", "parse_ppm_size", "AgentChainClient", "wallet_address",
]
