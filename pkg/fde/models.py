"""请求/响应模型：HTTP 服务和命令行共用的 JSON 结构"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator

from fde.errors import InvalidSpec
from fde.transmission import GaussianBump, TransmissionProblem

ComplexPair = List[float]
# 单次请求的截断上限，更深的截断走命令行
MAX_TRUNCATION = 1_000_000


def _pair(v):
    """Accept a real number or [re, im]."""
    if isinstance(v, (int, float)):
        return [float(v), 0.0]
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return [float(v[0]), float(v[1])]
    raise ValueError("复数必须写成数字或 [re, im]")


def to_complex(pair: ComplexPair) -> complex:
    return complex(pair[0], pair[1])


def from_complex(z: complex) -> ComplexPair:
    z = complex(z)
    return [z.real, z.imag]


class ParamsModel(BaseModel):
    """方程参数：c(sigma) = a1*sigma + a2*sigma^nu，步长 beta"""
    a1: float = Field(default=1.0, ge=0, description="sigma 的系数", example=1.0)
    a2: float = Field(default=0.0, ge=0, description="sigma^nu 的系数", example=0.5)
    nu: float = Field(default=0.5, gt=0, lt=1, description="分数阶指数", example=0.5)
    beta: float = Field(default=1.0, description="差分步长，不能为 0", example=1.0)

    @field_validator("beta")
    @classmethod
    def beta_nonzero(cls, v):
        if v == 0:
            raise ValueError("beta 不能为 0")
        return v


class OmegaRequest(BaseModel):
    """校验请求：Omega 的 JSON 形式 + 方程参数"""
    omega: Dict[str, Any] = Field(..., description="OmegaSpec 的 JSON 形式（delta0, A, B, deltas, families）")
    params: ParamsModel = Field(default_factory=ParamsModel, description="方程参数")
    sigma: ComplexPair = Field(default=[1.0, 0.0], description="Laplace 变量 sigma，写成 [re, im]")
    scan_depth: int = Field(default=4096, ge=10, le=1 << 20, description="级数扫描深度")

    @field_validator("sigma", mode="before")
    @classmethod
    def normalize_sigma(cls, v):
        return _pair(v)

    class Config:
        json_schema_extra = {
            "example": {
                "omega": {
                    "delta0": [1.0, 0.0],
                    "families": [{"kind": "h", "count": 1,
                                  "generator": {"form": "affine-power", "coeffs": {"c1": 1.0, "p": 2.0}}}],
                },
                "params": {"a1": 1.0, "a2": 0.0, "nu": 0.5, "beta": 1.0},
                "sigma": [1.0, 0.0],
            }
        }


class EvaluateRequest(BaseModel):
    """在若干点上计算 Omega(z)"""
    omega: Dict[str, Any] = Field(..., description="OmegaSpec 的 JSON 形式")
    points: List[ComplexPair] = Field(..., min_length=1, max_length=1000, description="z 点列表，每个写成 [re, im]")
    truncation: Optional[int] = Field(default=None, ge=1, le=MAX_TRUNCATION,
                                      description="乘积截断项数，缺省用 FDE_TRUNCATION")

    @field_validator("points", mode="before")
    @classmethod
    def normalize_points(cls, v):
        if not isinstance(v, list):
            raise ValueError("points 必须是列表")
        return [_pair(p) for p in v]


class OmegaPoint(BaseModel):
    z: ComplexPair
    value: ComplexPair
    tail_estimate: float


class EvaluateResponse(BaseModel):
    truncation: int = Field(..., description="实际使用的截断项数")
    values: List[OmegaPoint]


class ZerosRequest(BaseModel):
    """S+-(z; theta1, theta2, p/2q, q2) 的零点表"""
    form: str = Field(default="s_plus", description="s_plus 或 s_minus", example="s_plus")
    theta1: float = Field(default=0.0, ge=0, description="第一个相位", example=0.7853981633974483)
    theta2: float = Field(default=0.0, ge=0, description="第二个相位", example=0.0)
    p: int = Field(default=4, description="omega0 = q*pi/p 的分母", example=4)
    q: int = Field(default=1, ge=1, description="omega0 = q*pi/p 的分子", example=1)
    q2: float = Field(default=2.0, gt=0, description="第二项的振幅，不能为 1", example=2.0)

    @field_validator("form")
    @classmethod
    def check_form(cls, v):
        if v not in ("s_plus", "s_minus"):
            raise ValueError("form 只能是 s_plus 或 s_minus")
        return v


class FactorizeRequest(BaseModel):
    """把三角系数写成乘积形式，并与直接计算比较"""
    coefficient: Dict[str, Any] = Field(..., description="TrigCoefficientSpec 的 JSON 形式，必须含 form")
    points: List[ComplexPair] = Field(..., min_length=1, max_length=200, description="比较点")
    truncation: Optional[int] = Field(default=None, ge=1, le=MAX_TRUNCATION, description="乘积截断项数")
    extrapolate: bool = Field(default=False, description="是否做一步 Richardson 外推")

    @field_validator("points", mode="before")
    @classmethod
    def normalize_points(cls, v):
        if not isinstance(v, list):
            raise ValueError("points 必须是列表")
        return [_pair(p) for p in v]

    class Config:
        json_schema_extra = {
            "example": {
                "coefficient": {"form": "sin_shift", "q0": 1.0, "theta": 0.5},
                "points": [[0.3, 0.1], [1.2, -0.4]],
                "truncation": 10000,
            }
        }


class FactorizeRow(BaseModel):
    z: ComplexPair
    product: ComplexPair
    direct: ComplexPair
    relative_error: float


class FactorizeResponse(BaseModel):
    label: str
    truncation: int
    rows: List[FactorizeRow]


class CornerModel(BaseModel):
    q: int = Field(..., ge=1, description="omega0 = q*pi/p", example=1)
    p: int = Field(..., description="omega0 = q*pi/p，要求 p > 2q", example=3)


class ForcingModel(BaseModel):
    type: str = Field(default="gaussian_bump", description="目前只支持 gaussian_bump")
    r0: float = Field(default=1.0, gt=0, description="中心半径 r0（x1 = ln r0）")
    width: float = Field(default=0.5, gt=0, description="x1 方向的宽度")
    t_ramp: float = Field(default=1.0, ge=0, description="时间上的线性爬升时长")

    @field_validator("type")
    @classmethod
    def check_type(cls, v):
        if v != "gaussian_bump":
            raise ValueError(f"不支持的外力类型: {v}")
        return v


class TransmissionProblemModel(BaseModel):
    """传输问题的 JSON 描述"""
    omega0: CornerModel
    a1: float = Field(..., ge=0, description="动态条件中 sigma 的系数")
    a2: float = Field(..., ge=0, description="动态条件中 sigma^nu 的系数")
    a3: float = Field(..., gt=0, description="动态条件中的 a3")
    a4: float = Field(..., gt=0, description="通量条件中的 a4")
    kappa: float = Field(..., gt=0, description="通量跳跃系数，不能为 1")
    s0: float = Field(..., description="退化指数 s0，s* = s0 + 1")
    nu: float = Field(..., gt=0, lt=1, description="分数阶指数")
    s: float = Field(..., description="权重 s（u = e^{s x1} U）")
    forcing: Optional[ForcingModel] = Field(default=None, description="外力；缺省表示 f = 0")

    class Config:
        json_schema_extra = {
            "example": {
                "omega0": {"q": 1, "p": 3},
                "a1": 1.0, "a2": 0.5, "a3": 1.0, "a4": 0.5,
                "kappa": 2.0, "s0": -2.0, "nu": 0.5, "s": 0.3,
                "forcing": {"type": "gaussian_bump", "r0": 1.0, "width": 0.5, "t_ramp": 1.0},
            }
        }

    def to_problem(self) -> TransmissionProblem:
        if self.a1 + self.a2 <= 0:
            raise InvalidSpec("a1 + a2 must be positive")
        bump = None
        if self.forcing is not None:
            bump = GaussianBump(self.forcing.r0, self.forcing.width, self.forcing.t_ramp)
        return TransmissionProblem(p=self.omega0.p, q=self.omega0.q, a1=self.a1, a2=self.a2, a3=self.a3,
                                   a4=self.a4, kappa_jump=self.kappa, s0=self.s0, nu=self.nu,
                                   weight_s=self.s, forcing=bump)


class ReportResponse(BaseModel):
    """所有校验接口返回的报告"""
    subject: str
    passed: bool
    clauses: List[Dict[str, Any]]
    notes: Dict[str, Any] = Field(default_factory=dict)


class AnglesResponse(BaseModel):
    theta1: float
    theta2: float
    q2: float
    q2_star: float
    sign: int
    M: float
    identity_defect: float
    G0: ComplexPair = Field(..., description="G(0) 的值")
    admissibility: ReportResponse
