"""Exception hierarchy shared by every subsystem."""


class WasmlessError(Exception):
    pass


# wasm module tools
class NotWasm(WasmlessError):
    pass


class MalformedModule(WasmlessError):
    pass


class UnsupportedFeature(WasmlessError):
    def __init__(self, message, opcode=None):
        super().__init__(message)
        self.opcode = opcode


class TransformOverflow(WasmlessError):
    pass


# executor
class EngineReject(WasmlessError):
    pass


# registry / ledger
class NameInvalid(WasmlessError):
    pass


class NotFound(WasmlessError):
    pass


class StorageFailure(WasmlessError):
    pass


# gateway
class ConfigInvalid(WasmlessError):
    pass


class BindFailure(WasmlessError):
    pass


# bench harness
class BackendUnavailable(WasmlessError):
    pass


class GuestMissing(WasmlessError):
    pass


class OutputMismatch(WasmlessError):
    pass


class NoSamples(WasmlessError):
    pass
