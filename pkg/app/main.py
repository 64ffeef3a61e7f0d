from fastapi import FastAPI

from app.routes import estimation, evaluation

app = FastAPI(title="Partition-DAG Estimator")

# Include routers
app.include_router(estimation.router)
app.include_router(evaluation.router)


@app.get("/")
async def root():
    """Service description"""
    return {"service": app.title, "docs": "/docs"}
