import logging
from typing import Any, Callable

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from fde import __version__
from fde.coefficient import EquationParams, evaluate_omega, omega_from_dict, validate_hypotheses
from fde.config import configure_logging, get_settings
from fde.errors import FDEError
from fde.factorization import TrigCoefficientSpec, factorize, find_zeros
from fde.models import (AnglesResponse, EvaluateRequest, EvaluateResponse, FactorizeRequest, FactorizeResponse,
                        FactorizeRow, OmegaPoint, OmegaRequest, ReportResponse, TransmissionProblemModel,
                        ZerosRequest, from_complex, to_complex)
from fde.transmission import G_at_zero, admissible_weight, derive_angles, locate_zeros

# 配置日志
configure_logging()
logger = logging.getLogger(__name__)

app = FastAPI(
    title="FDE API",
    description="变系数泛函差分方程求解服务：系数校验、乘积展开、零点表和传输问题的角度/权重检查",
    version=__version__
)

# CORS 中间件
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def _run(label: str, fn: Callable[[], Any]) -> Any:
    """执行计算，把库的异常映射成 HTTP 状态码"""
    try:
        return fn()
    except HTTPException:
        # 重新抛出 HTTPException（如 400 错误）
        raise
    except FDEError as e:
        logger.warning(f"{label} 失败: {type(e).__name__}: {e.message}")
        raise HTTPException(status_code=e.http_status, detail=e.to_dict())
    except Exception as e:
        logger.error(f"{label} 服务器错误: {str(e)}")
        raise HTTPException(status_code=500, detail=f"服务器错误: {str(e)}")


@app.get("/health")
def health():
    """健康检查"""
    settings = get_settings()
    return {"status": "ok", "version": __version__, "truncation": settings.truncation,
            "threads": settings.threads}


@app.post("/validate/omega", response_model=ReportResponse, summary="校验 Omega 的假设条件")
def validate_omega(request: OmegaRequest):
    def work():
        spec = omega_from_dict(request.omega)
        p = request.params
        params = EquationParams(a1=p.a1, a2=p.a2, nu=p.nu, beta=p.beta)
        report = validate_hypotheses(spec, params, scan_depth=request.scan_depth,
                                     sigma=to_complex(request.sigma))
        logger.info(f"校验完成: {report.subject}, 通过={report.passed}")
        return report.to_dict()
    return _run("校验 Omega", work)


@app.post("/omega/evaluate", response_model=EvaluateResponse, summary="计算 Omega(z)")
def omega_evaluate(request: EvaluateRequest):
    def work():
        spec = omega_from_dict(request.omega)
        n = request.truncation or get_settings().truncation
        values = []
        for pair in request.points:
            result = evaluate_omega(spec, to_complex(pair), n)
            values.append(OmegaPoint(z=pair, value=from_complex(result.value),
                                     tail_estimate=result.tail_estimate))
        logger.info(f"计算 Omega: {len(values)} 个点, 截断 {n}")
        return EvaluateResponse(truncation=n, values=values)
    return _run("计算 Omega", work)


@app.post("/zeros", summary="S+- 的零点表")
def zeros(request: ZerosRequest):
    def work():
        spec = TrigCoefficientSpec(form=request.form, theta1=request.theta1, theta2=request.theta2,
                                   p=request.p, q=request.q, q2=request.q2)
        table = find_zeros(spec)
        logger.info(f"零点表: {spec.label}, K={table.count}")
        return table.to_dict()
    return _run("零点表", work)


@app.post("/factorize", response_model=FactorizeResponse, summary="乘积展开与直接计算的比较")
def factorize_endpoint(request: FactorizeRequest):
    def work():
        spec = TrigCoefficientSpec.from_dict(request.coefficient)
        form = factorize(spec, request.truncation)
        rows = []
        for pair in request.points:
            cmp = form.compare(to_complex(pair), request.truncation, request.extrapolate)
            rows.append(FactorizeRow(z=pair, product=from_complex(cmp["product"]),
                                     direct=from_complex(cmp["direct"]),
                                     relative_error=float(cmp["relative_error"])))
        return FactorizeResponse(label=form.label, truncation=form.truncation, rows=rows)
    return _run("乘积展开", work)


@app.post("/transmission/angles", response_model=AnglesResponse, summary="传输问题的角度和权重检查")
def transmission_angles(request: TransmissionProblemModel):
    def work():
        problem = request.to_problem()
        fact = locate_zeros(problem, derive_angles(problem))
        report = admissible_weight(problem, fact)
        logger.info(f"传输问题: s={problem.weight_s}, 权重可用={report.passed}")
        return AnglesResponse(theta1=fact.theta1, theta2=fact.theta2, q2=fact.q2, q2_star=fact.q2_star,
                              sign=fact.sign, M=fact.big_m, identity_defect=fact.identity_defect,
                              G0=from_complex(G_at_zero(problem, fact)),
                              admissibility=ReportResponse(**report.to_dict()))
    return _run("传输问题", work)


if __name__ == "__main__":
    import uvicorn
    # 本地默认 8080，部署时用 PORT 环境变量
    uvicorn.run(app, host="0.0.0.0", port=get_settings().port)
