from pydantic import BaseModel, ConfigDict, Field, model_validator


class BlockLayout(BaseModel):
    """(m, p, s) partition of an m x (p*s) matrix into p block vectors of width s."""

    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1)
    p: int = Field(ge=1)
    s: int = Field(ge=1)

    @model_validator(mode="after")
    def check_tall(self):
        if self.m < self.n:
            raise ValueError(f"layout needs m >= n, got m={self.m}, n={self.n}")
        return self

    @property
    def n(self) -> int:
        return self.p * self.s

    def block(self, k: int) -> slice:
        """Column slice of block k (0-based)."""
        return slice(k * self.s, (k + 1) * self.s)

    def leading(self, k: int) -> slice:
        """Column slice of blocks 0..k-1."""
        return slice(0, k * self.s)

    @classmethod
    def parse(cls, text: str) -> "BlockLayout":
        parts = [part.strip() for part in str(text).split(",") if part.strip()]
        if len(parts) != 3:
            raise ValueError(f"dims must be 'm,p,s', got {text!r}")
        m, p, s = (int(part) for part in parts)
        return cls(m=m, p=p, s=s)

    def label(self) -> str:
        return f"{self.m},{self.p},{self.s}"


class SkeletonOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_fix: bool = False
    reorth_first_block: bool = False
    rpltol: float = Field(default=100.0, ge=0.0)
    auto_shift: bool = False
    # convert each muscle T block into the skeleton's own (direct or inverse) form
    convert_t_form: bool = False
