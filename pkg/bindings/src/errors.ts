/** Error raised for invalid buffer shapes, parameters, or backend failures. */
export class BindingError extends Error {
  /** Name of the offending argument or field. */
  readonly field: string;

  constructor(field: string, message: string) {
    super(message);
    this.name = "BindingError";
    this.field = field;
  }
}

export function checkFinite(field: string, values: ArrayLike<number>): void {
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new BindingError(field, `${field}[${i}] is not finite: ${values[i]}`);
    }
  }
}
