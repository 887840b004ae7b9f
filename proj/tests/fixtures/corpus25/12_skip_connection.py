from keras.layers import Input, Conv2D, Add, Flatten, Dense
from keras.models import Model
from keras.optimizers import Adam

inputs = Input(shape=(3, 32, 32))
x = Conv2D(16, (3, 3), activation='relu')(inputs)
y = Conv2D(16, (3, 3))(x)
z = Add()([x, y])
z = Flatten()(z)
outputs = Dense(10, activation='softmax')(z)
model = Model(inputs=inputs, outputs=outputs)
model.compile(optimizer=Adam(lr=0.001), loss='categorical_crossentropy')
